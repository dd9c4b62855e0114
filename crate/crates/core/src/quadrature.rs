//! Globally adaptive 15-point Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};

// Kronrod abscissae on [0, 1); the Gauss-7 nodes are the odd entries.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and evaluation budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_evals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::zero(),
            rel_tol: T::lit(1e-12),
            max_evals: 1_000_000,
        }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn rel(rel_tol: T) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: T,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Segment<T> {}
impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// One GK15 panel on [a, b]: (kronrod value, error estimate).
pub fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center);
    let mut res_g = f_center * T::lit(WG[3]);
    let mut res_k = f_center * T::lit(WGK[7]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let x = half_len * T::lit(XGK[j]);
        let y1 = f(center - x);
        let y2 = f(center + x);
        fv1[j] = y1;
        fv2[j] = y2;
        let w = T::lit(WGK[j]);
        res_k += w * (y1 + y2);
        res_abs += w * (y1.abs() + y2.abs());
        if j % 2 == 1 {
            res_g += T::lit(WG[j / 2]) * (y1 + y2);
        }
    }
    let mean = res_k * half;
    let mut res_asc = T::lit(WGK[7]) * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half_len.abs();
    let value = res_k * half_len;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((res_k - res_g) * half_len).abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if scale < T::one() { res_asc * scale } else { res_asc };
    }
    let floor = T::lit(50.0) * T::epsilon() * res_abs;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    if !value.is_finite() {
        err = T::infinity();
    }
    (value, err)
}

/// Integrate `f` over the consecutive intervals defined by `breakpoints`
/// (at least two, increasing), refining the worst panel until the total
/// error estimate is within `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    breakpoints: &[T],
    opts: QuadOptions<T>,
) -> Result<QuadResult<T>> {
    if breakpoints.len() < 2 {
        return Err(Error::Domain("integration needs at least two breakpoints".into()));
    }
    let rel_tol = opts.rel_tol.max(T::lit(100.0) * T::epsilon());
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Segment<T>> = Vec::new();
    let mut evals = 0usize;
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a < b) {
            if a == b {
                continue;
            }
            return Err(Error::Domain(format!("breakpoints not increasing: {a} >= {b}")));
        }
        let (value, error) = gk15(&mut f, a, b);
        evals += 15;
        heap.push(Segment { a, b, value, error });
    }
    let (mut run_total, mut run_err) = totals(heap.iter());
    loop {
        let mut tol = opts.abs_tol.max(rel_tol * run_total.abs());
        if run_err <= tol || heap.is_empty() {
            // running sums drift; confirm with an exact pass
            let (total, err) = totals(heap.iter().chain(done.iter()));
            run_total = total;
            run_err = err;
            if !total.is_finite() {
                return Err(Error::Quadrature(format!("non-finite integrand value, total {total}")));
            }
            tol = opts.abs_tol.max(rel_tol * total.abs());
            if err <= tol || heap.is_empty() {
                return Ok(QuadResult {
                    value: total,
                    abs_error: err,
                    evals,
                });
            }
        }
        if !run_total.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand value, total {run_total}"
            )));
        }
        if evals + 30 > opts.max_evals {
            return Err(Error::Quadrature(format!(
                "budget of {} evaluations exhausted (estimate {run_total}, error {run_err}, tolerance {tol})",
                opts.max_evals
            )));
        }
        let worst = heap.pop().expect("heap checked non-empty");
        let mid = T::lit(0.5) * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // panel at roundoff width; its error stays in the total
            done.push(worst);
            continue;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evals += 30;
        run_total += v1 + v2 - worst.value;
        run_err += e1 + e2 - worst.error;
        if run_err < T::zero() {
            run_err = e1 + e2;
        }
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

fn totals<'a, T: Real>(segs: impl Iterator<Item = &'a Segment<T>>) -> (T, T) {
    let (vals, errs): (Vec<T>, Vec<T>) = segs.map(|s| (s.value, s.error)).unzip();
    (pairwise_sum(&vals), pairwise_sum(&errs))
}

/// Evenly spaced breakpoints `lo, lo + h, ..., hi` with roughly `width` spacing.
pub fn panels<T: Real>(lo: T, hi: T, width: T) -> Vec<T> {
    let count = ((hi - lo) / width).ceil().max(T::one()).to_usize().unwrap_or(1);
    let h = (hi - lo) / T::from_usize_lossy(count);
    let mut pts: Vec<T> = (0..count).map(|i| lo + h * T::from_usize_lossy(i)).collect();
    pts.push(hi);
    pts
}
