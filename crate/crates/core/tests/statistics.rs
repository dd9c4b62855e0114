use selfnorm::distances::kolmogorov_between;
use selfnorm::statistics::psi_slices;
use selfnorm::{DistributionSpec, SeededStream};

fn rademacher_psi(y: &[f64], m: usize, s: SeededStream) -> Vec<f64> {
    let mut eps = vec![0.0; y.len()];
    (0..m)
        .map(|r| {
            let mut rng = s.child(r as u64).rng();
            DistributionSpec::Rademacher.fill(&mut rng, &mut eps);
            psi_slices(&eps, y).unwrap()
        })
        .collect()
}

#[test]
fn psi_law_ignores_sign_flips_of_y() {
    let n = 150;
    let mut rng = SeededStream::new(99, 0).rng();
    let law = DistributionSpec::pareto_sq(1.2);
    let y: Vec<f64> = (0..n).map(|_| law.draw(&mut rng)).collect();
    let flipped: Vec<f64> = y
        .iter()
        .map(|v| v * DistributionSpec::Rademacher.draw(&mut rng))
        .collect();
    let a = rademacher_psi(&y, 100_000, SeededStream::new(99, 1));
    let b = rademacher_psi(&flipped, 100_000, SeededStream::new(99, 2));
    let ks = kolmogorov_between(&a, &b).unwrap().value;
    assert!(ks < 0.015, "{ks}");
}
