//! Monte Carlo against the Laplace identity over the catalogue, and the
//! n-free plateau for Cauchy weights.

use selfnorm::delta_engine::{delta_laplace, delta_mc};
use selfnorm::rng::hash64;
use selfnorm::{DistributionSpec, SeededStream};

#[test]
fn laplace_identity_matches_monte_carlo_on_catalogue() {
    let laws = [
        DistributionSpec::Normal01,
        DistributionSpec::Rademacher,
        DistributionSpec::PointMass { c: 2.0 },
        DistributionSpec::pareto_sq(1.5),
        DistributionSpec::ParetoSq {
            alpha: 1.2,
            symmetric: false,
        },
        DistributionSpec::log_pareto2(),
        DistributionSpec::log_pareto1(),
        DistributionSpec::Cauchy,
        DistributionSpec::StudentT { nu: 3.0 },
    ];
    let mut failures = Vec::new();
    for (i, law) in laws.iter().enumerate() {
        for n in [2usize, 5, 20, 100] {
            for gamma in [1.2, 1.5, 2.0] {
                let exact = delta_laplace(law, n, gamma).unwrap().value;
                let stream = SeededStream::new(31, hash64(&[i as u64, n as u64, gamma.to_bits()]));
                let mc = delta_mc(law, n, gamma, 100_000, stream).unwrap();
                if (mc.value - exact).abs() > 4.0 * mc.stderr + 1e-12 {
                    failures.push(format!(
                        "{law} n={n} γ={gamma}: {} ± {} vs {exact}",
                        mc.value, mc.stderr
                    ));
                }
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn cauchy_plateau() {
    let s = SeededStream::new(5, 0);
    let a = delta_mc(&DistributionSpec::Cauchy, 1000, 1.5, 20_000, s).unwrap();
    let b = delta_mc(&DistributionSpec::Cauchy, 100_000, 1.5, 2000, s.child(1)).unwrap();
    assert!((a.value / b.value - 1.0).abs() < 0.05, "{} vs {}", a.value, b.value);
}

#[test]
fn normal_weights_vanish_monotonically() {
    let values: Vec<f64> = [100usize, 1000, 10_000]
        .iter()
        .map(|&n| {
            delta_mc(
                &DistributionSpec::Normal01,
                n,
                1.5,
                2000,
                SeededStream::new(8, n as u64),
            )
            .unwrap()
            .value
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}
