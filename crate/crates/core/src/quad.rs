//! Composite Gauss–Legendre quadrature.

// 10-point rule on [-1, 1]; symmetric, so only the positive half is stored.
const NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// `int_a^b f` with `panels` equal Gauss–Legendre panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += s * half;
    }
    total
}

/// Tensor-product rule on the rectangle `[a0, b0] x [a1, b1]`.
pub fn integrate_2d(f: impl Fn(f64, f64) -> f64, (a0, b0): (f64, f64), (a1, b1): (f64, f64), panels: usize) -> f64 {
    integrate(|x| integrate(|y| f(x, y), a1, b1, panels), a0, b0, panels)
}

/// `int_0^inf f(r) dr` via `r = s / (1 - s)`.
pub fn integrate_half_line(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - s;
            f(s / one_minus) / (one_minus * one_minus)
        },
        0.0,
        1.0,
        panels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exact_for_high_degree_polynomials() {
        let v = integrate(|x| x.powi(19) + x.powi(18), -1.0, 1.0, 1);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn half_line_cauchy() {
        let v = integrate_half_line(|r| 1.0 / (1.0 + r * r), 200);
        assert!((v - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_on_square() {
        let v = integrate_2d(|x, y| (-x * x - y * y).exp(), (-8.0, 8.0), (-8.0, 8.0), 16);
        assert!((v - PI).abs() < 1e-12);
    }
}
