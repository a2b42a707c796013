//! Bivariate standard normal CDF.
//!
//! Gauss-Legendre reduction of the bivariate integral in the Drezner-Wesolowsky
//! family, following Genz's `BVND` with the switch to the asymptotic expansion
//! at `|rho| = 0.925`. For `rho < 0` only the second limit is reflected; a
//! naive port that reflects both limits is wrong in that branch.

use std::f64::consts::PI;

use super::normal::{std_normal_cdf, std_normal_pdf, TWO_PI};
use crate::error::{Error, Result};

/// Largest admissible `|rho|`.
pub const MAX_ABS_RHO: f64 = 1.0 - 1e-12;

/// Callers clamp correlations to this before evaluating.
pub const RHO_CLAMP: f64 = 1.0 - 1e-9;

const HIGH_RHO: f64 = 0.925;

// (weight, node) for the negative half of each symmetric rule.
const GL6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, -0.932_469_514_203_152_2),
    (0.360_761_573_048_138_4, -0.661_209_386_466_264_7),
    (0.467_913_934_572_690_4, -0.238_619_186_083_197),
];

const GL12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, -0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, -0.904_117_256_370_475),
    (0.160_078_328_543_346_4, -0.769_902_674_194_305),
    (0.203_167_426_723_065_9, -0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, -0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, -0.125_233_408_511_469_2),
];

#[allow(clippy::excessive_precision)]
const GL20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, -0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, -0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, -0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, -0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, -0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, -0.636_053_680_726_515),
    (0.131_688_638_449_176_6, -0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, -0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, -0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, -0.076_526_521_133_497_33),
];

fn rule(abs_rho: f64) -> &'static [(f64, f64)] {
    if abs_rho < 0.3 {
        &GL6
    } else if abs_rho < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

#[derive(Clone, Debug)]
enum Kernel {
    Independent,
    /// Nodes of the integral over `asin(rho)`: `(sin(theta), 1/(1 - sin^2), weight)`.
    Moderate {
        nodes: Vec<(f64, f64, f64)>,
    },
    /// Asymptotic branch: `(x^2, sqrt(1 - x^2), weight * a/2)`.
    High {
        a: f64,
        a_sq: f64,
        nodes: Vec<(f64, f64, f64)>,
    },
}

/// Bivariate normal CDF with a fixed correlation; node tables are computed once.
#[derive(Clone, Debug)]
pub struct Bvn {
    rho: f64,
    kernel: Kernel,
}

impl Bvn {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.abs() < MAX_ABS_RHO) {
            return Err(Error::DegenerateCorrelation { rho });
        }
        let abs = rho.abs();
        let kernel = if rho == 0.0 {
            Kernel::Independent
        } else if abs < HIGH_RHO {
            let asr = rho.asin();
            let scale = asr / (2.0 * TWO_PI);
            let mut nodes = Vec::with_capacity(2 * rule(abs).len());
            for &(w, x) in rule(abs) {
                for s in [-1.0, 1.0] {
                    let sn = (asr * (s * x + 1.0) / 2.0).sin();
                    nodes.push((sn, 1.0 / (1.0 - sn * sn), w * scale));
                }
            }
            Kernel::Moderate { nodes }
        } else {
            let a_sq = (1.0 - rho) * (1.0 + rho);
            let a = a_sq.sqrt();
            let half = a / 2.0;
            let mut nodes = Vec::with_capacity(2 * GL20.len());
            for &(w, x) in &GL20 {
                for s in [-1.0, 1.0] {
                    let xv = half * (s * x + 1.0);
                    let xs = xv * xv;
                    nodes.push((xs, (1.0 - xs).sqrt(), half * w));
                }
            }
            Kernel::High { a, a_sq, nodes }
        };
        Ok(Self { rho, kernel })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `P(X < a, Y < b)` for standard normals with correlation `rho`.
    pub fn cdf(&self, a: f64, b: f64) -> f64 {
        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            return 0.0;
        }
        if a == f64::INFINITY {
            return std_normal_cdf(b);
        }
        if b == f64::INFINITY {
            return std_normal_cdf(a);
        }
        let v = self.upper_orthant(-a, -b);
        v.clamp(0.0, 1.0)
    }

    /// Joint density at `(a, b)`.
    pub fn pdf(&self, a: f64, b: f64) -> f64 {
        if a.is_infinite() || b.is_infinite() {
            return 0.0;
        }
        let om = (1.0 - self.rho) * (1.0 + self.rho);
        let q = (a * a - 2.0 * self.rho * a * b + b * b) / om;
        (-0.5 * q).exp() / (TWO_PI * om.sqrt())
    }

    /// The CDF together with its partial derivatives in `a`, `b` and `rho`.
    pub fn cdf_with_partials(&self, a: f64, b: f64) -> (f64, f64, f64, f64) {
        let f = self.cdf(a, b);
        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            return (f, 0.0, 0.0, 0.0);
        }
        if a == f64::INFINITY {
            return (f, 0.0, std_normal_pdf(b), 0.0);
        }
        if b == f64::INFINITY {
            return (f, std_normal_pdf(a), 0.0, 0.0);
        }
        let s = ((1.0 - self.rho) * (1.0 + self.rho)).sqrt();
        let da = std_normal_pdf(a) * std_normal_cdf((b - self.rho * a) / s);
        let db = std_normal_pdf(b) * std_normal_cdf((a - self.rho * b) / s);
        (f, da, db, self.pdf(a, b))
    }

    /// Genz's BVND: `P(X > h, Y > k)`.
    fn upper_orthant(&self, h: f64, k: f64) -> f64 {
        match &self.kernel {
            Kernel::Independent => std_normal_cdf(-h) * std_normal_cdf(-k),
            Kernel::Moderate { nodes } => {
                let hk = h * k;
                let hs = (h * h + k * k) / 2.0;
                let mut acc = 0.0;
                for &(sn, inv, w) in nodes {
                    acc += w * ((sn * hk - hs) * inv).exp();
                }
                acc + std_normal_cdf(-h) * std_normal_cdf(-k)
            }
            Kernel::High { a, a_sq, nodes } => {
                let r = self.rho;
                let (k, hk) = if r < 0.0 { (-k, -h * k) } else { (k, h * k) };
                let bs = (h - k) * (h - k);
                let c = (4.0 - hk) / 8.0;
                let d = (12.0 - hk) / 16.0;
                let asr = -(bs / a_sq + hk) / 2.0;
                let mut bvn = 0.0;
                if asr > -100.0 {
                    bvn = a
                        * asr.exp()
                        * (1.0 - c * (bs - a_sq) * (1.0 - d * bs / 5.0) / 3.0
                            + c * d * a_sq * a_sq / 5.0);
                }
                if hk > -100.0 {
                    let b = bs.sqrt();
                    bvn -= (-hk / 2.0).exp()
                        * TWO_PI.sqrt()
                        * std_normal_cdf(-b / a)
                        * b
                        * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
                }
                for &(xs, rs, aw) in nodes {
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += aw
                            * asr.exp()
                            * ((-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
                bvn = -bvn / TWO_PI;
                if r > 0.0 {
                    bvn + std_normal_cdf(-h.max(k))
                } else {
                    let mut v = -bvn;
                    if k > h {
                        v += if h < 0.0 {
                            std_normal_cdf(k) - std_normal_cdf(h)
                        } else {
                            std_normal_cdf(-h) - std_normal_cdf(-k)
                        };
                    }
                    v
                }
            }
        }
    }
}

/// `Phi_2(a, b; rho)`: probability that two standard normals with correlation
/// `rho` fall below `a` and `b`.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || rho.is_nan() {
        return Err(Error::InvalidArgument("bivariate normal CDF of NaN".into()));
    }
    Ok(Bvn::new(rho)?.cdf(a, b))
}

/// Clamp a correlation into the admissible range.
#[inline]
pub fn clamp_rho(rho: f64) -> f64 {
    rho.clamp(-RHO_CLAMP, RHO_CLAMP)
}

/// Closed form at the origin, `1/4 + asin(rho) / (2 pi)`.
pub fn origin_quadrant(rho: f64) -> f64 {
    0.25 + rho.asin() / (2.0 * PI)
}
