//! Test problems and their initialization / termination metadata.
//!
//! Binary problems are maximized, continuous ones minimized. Sums run in
//! ascending index order so results are reproducible to the bit.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Benchmark {
    OneMax,
    LeadingOnes,
    Sphere,
    Ellipsoid,
    Cigar,
    Rosenbrock,
    Ackley,
    Bohachevsky,
    Schaffer,
    Rastrigin,
}

impl Benchmark {
    pub const ALL: [Benchmark; 10] = [
        Self::OneMax,
        Self::LeadingOnes,
        Self::Sphere,
        Self::Ellipsoid,
        Self::Cigar,
        Self::Rosenbrock,
        Self::Ackley,
        Self::Bohachevsky,
        Self::Schaffer,
        Self::Rastrigin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::OneMax => "onemax",
            Self::LeadingOnes => "leadingones",
            Self::Sphere => "sphere",
            Self::Ellipsoid => "ellipsoid",
            Self::Cigar => "cigar",
            Self::Rosenbrock => "rosenbrock",
            Self::Ackley => "ackley",
            Self::Bohachevsky => "bohachevsky",
            Self::Schaffer => "schaffer",
            Self::Rastrigin => "rastrigin",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Self::OneMax | Self::LeadingOnes)
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|b| b.name()).collect::<Vec<_>>().join(", ")
    }

    /// Functions built from consecutive pairs need `d >= 2`.
    pub fn min_dim(self) -> usize {
        match self {
            Self::Rosenbrock | Self::Bohachevsky | Self::Schaffer => 2,
            Self::OneMax | Self::LeadingOnes => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|b| b.name() == key)
            .ok_or_else(|| Error::UnknownFunction {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

impl From<Benchmark> for String {
    fn from(b: Benchmark) -> String {
        b.name().to_string()
    }
}

impl TryFrom<String> for Benchmark {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

pub fn onemax(x: &[bool]) -> f64 {
    x.iter().filter(|&&b| b).count() as f64
}

pub fn leading_ones(x: &[bool]) -> f64 {
    x.iter().take_while(|&&b| b).count() as f64
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn ellipsoid(x: &[f64]) -> f64 {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let e = if d > 1 { i as f64 / (d - 1) as f64 } else { 0.0 };
            let s = 1000f64.powf(e);
            s * s * v * v
        })
        .sum()
}

pub fn cigar(x: &[f64]) -> f64 {
    match x.split_first() {
        None => 0.0,
        Some((first, rest)) => first * first + 1000.0 * 1000.0 * sphere(rest),
    }
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

pub fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq = sphere(x) / d;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    (20.0 - 20.0 * (-0.2 * sq.sqrt()).exp() + E - cs.exp()).max(0.0)
}

/// `Σ x_i² + 2x_{i+1}² − 0.3cos(3πx_i) − 0.4cos(4πx_{i+1}) + 0.7`, written
/// with `1 − cos` terms so the optimum evaluates to exactly zero.
pub fn bohachevsky(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            w[0] * w[0]
                + 2.0 * w[1] * w[1]
                + 0.3 * (1.0 - (3.0 * PI * w[0]).cos())
                + 0.4 * (1.0 - (4.0 * PI * w[1]).cos())
        })
        .sum()
}

pub fn schaffer(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let r = w[0] * w[0] + w[1] * w[1];
            r.powf(0.25) * ((50.0 * r.powf(0.1)).sin().powi(2) + 1.0)
        })
        .sum()
}

/// `10d + Σ (x_i² − 10cos 2πx_i)`, summed as `Σ x_i² + 10(1 − cos 2πx_i)`.
pub fn rastrigin(x: &[f64]) -> f64 {
    x.iter()
        .map(|v| v * v + 10.0 * (1.0 - (2.0 * PI * v).cos()))
        .sum()
}

pub fn eval_binary(b: Benchmark, x: &[bool]) -> Result<f64> {
    match b {
        Benchmark::OneMax => Ok(onemax(x)),
        Benchmark::LeadingOnes => Ok(leading_ones(x)),
        _ => Err(Error::InvalidParameter(format!("{b} is not a binary problem"))),
    }
}

pub fn eval_continuous(b: Benchmark, x: &[f64]) -> Result<f64> {
    let f = match b {
        Benchmark::Sphere => sphere,
        Benchmark::Ellipsoid => ellipsoid,
        Benchmark::Cigar => cigar,
        Benchmark::Rosenbrock => rosenbrock,
        Benchmark::Ackley => ackley,
        Benchmark::Bohachevsky => bohachevsky,
        Benchmark::Schaffer => schaffer,
        Benchmark::Rastrigin => rastrigin,
        _ => return Err(Error::InvalidParameter(format!("{b} is not a continuous problem"))),
    };
    Ok(f(x))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    /// Bit strings, initial `θ = 0.5` everywhere.
    Binary,
    /// Real vectors with the mean drawn uniformly from `[lo, hi]^d`.
    Continuous { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchmarkSpec {
    pub benchmark: Benchmark,
    pub d: usize,
    pub domain: Domain,
    pub optimum: f64,
    /// Continuous runs stop once `λ_min(C)` drops below this.
    pub eigen_floor: f64,
    pub budget: u64,
    /// Continuous success threshold; binary runs need the optimum itself.
    pub target: f64,
}

impl BenchmarkSpec {
    /// Initial standard deviation `(hi - lo) / 2`; `None` for binary problems.
    pub fn sigma0(&self) -> Option<f64> {
        match self.domain {
            Domain::Binary => None,
            Domain::Continuous { lo, hi } => Some((hi - lo) / 2.0),
        }
    }
}

pub fn default_spec(b: Benchmark, d: usize) -> Result<BenchmarkSpec> {
    if d < b.min_dim() {
        return Err(Error::InvalidParameter(format!(
            "{b} needs d >= {}, got {d}",
            b.min_dim()
        )));
    }
    let du = d as u64;
    let (domain, optimum, budget, target) = match b {
        Benchmark::OneMax => (Domain::Binary, d as f64, 3 * du * 100, d as f64),
        Benchmark::LeadingOnes => (Domain::Binary, d as f64, 4 * du * 10_000, d as f64),
        _ => {
            let (lo, hi) = match b {
                Benchmark::Rosenbrock => (-2.0, 2.0),
                Benchmark::Ackley => (1.0, 30.0),
                Benchmark::Bohachevsky => (1.0, 15.0),
                Benchmark::Schaffer => (10.0, 100.0),
                _ => (1.0, 5.0),
            };
            (Domain::Continuous { lo, hi }, 0.0, du * 1_000_000, 1e-10)
        }
    };
    let eigen_floor = if b == Benchmark::Schaffer { 1e-60 } else { 1e-30 };
    Ok(BenchmarkSpec {
        benchmark: b,
        d,
        domain,
        optimum,
        eigen_floor,
        budget,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const CONTINUOUS: [Benchmark; 8] = [
        Benchmark::Sphere,
        Benchmark::Ellipsoid,
        Benchmark::Cigar,
        Benchmark::Rosenbrock,
        Benchmark::Ackley,
        Benchmark::Bohachevsky,
        Benchmark::Schaffer,
        Benchmark::Rastrigin,
    ];

    #[test]
    fn binary_values() {
        assert_eq!(onemax(&[true; 9]), 9.0);
        assert_eq!(onemax(&[false; 9]), 0.0);
        assert_eq!(leading_ones(&[true, true, false, true]), 2.0);
        // literal sum of prefix products
        let x = [true, true, false, true];
        let literal: f64 = (0..x.len()).map(|j| x[..=j].iter().all(|&b| b) as u8 as f64).sum();
        assert_eq!(leading_ones(&x), literal);
    }

    #[test]
    fn hand_values() {
        assert_eq!(sphere(&[1.0, 1.0, 1.0]), 3.0);
        assert_eq!(ellipsoid(&[1.0, 1.0]), 1.0 + 1000.0 * 1000.0);
        assert_eq!(ellipsoid(&[2.0]), 4.0);
        assert_eq!(cigar(&[1.0, 2.0]), 1.0 + 4e6);
        assert_eq!(rosenbrock(&[0.0, 0.0]), 1.0);
        // textbook Rastrigin form
        let x = [0.3, -1.7, 2.2];
        let textbook = 10.0 * 3.0 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>();
        assert_relative_eq!(rastrigin(&x), textbook, epsilon = 1e-12);
        let textbook = x
            .windows(2)
            .map(|w| {
                w[0] * w[0] + 2.0 * w[1] * w[1] - 0.3 * (3.0 * PI * w[0]).cos() - 0.4 * (4.0 * PI * w[1]).cos() + 0.7
            })
            .sum::<f64>();
        assert_relative_eq!(bohachevsky(&x), textbook, epsilon = 1e-12);
        assert_relative_eq!(schaffer(&[3.0, 4.0]), 5f64.sqrt() * ((50.0 * 25f64.powf(0.1)).sin().powi(2) + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn optima_are_zero() {
        for b in CONTINUOUS {
            let x = if b == Benchmark::Rosenbrock { vec![1.0; 7] } else { vec![0.0; 7] };
            assert_eq!(eval_continuous(b, &x).unwrap(), 0.0, "{b}");
        }
    }

    proptest! {
        #[test]
        fn nonnegative(x in proptest::collection::vec(-50.0f64..50.0, 2..12)) {
            for b in CONTINUOUS {
                prop_assert!(eval_continuous(b, &x).unwrap() >= 0.0);
            }
        }

        #[test]
        fn onemax_increases_on_flip(x in proptest::collection::vec(any::<bool>(), 1..64), i in 0usize..64) {
            let i = i % x.len();
            prop_assume!(!x[i]);
            let mut y = x.clone();
            y[i] = true;
            prop_assert!(onemax(&y) > onemax(&x));
            let lo = leading_ones(&x) as usize;
            if i == lo {
                prop_assert!(leading_ones(&y) > leading_ones(&x));
            } else {
                prop_assert!(leading_ones(&y) >= leading_ones(&x));
            }
        }
    }

    #[test]
    fn specs() {
        let s = default_spec(Benchmark::Schaffer, 10).unwrap();
        assert_eq!(s.domain, Domain::Continuous { lo: 10.0, hi: 100.0 });
        assert_eq!(s.sigma0(), Some(45.0));
        assert_eq!(s.eigen_floor, 1e-60);
        assert_eq!(default_spec(Benchmark::OneMax, 512).unwrap().budget, 153_600);
        assert_eq!(default_spec(Benchmark::LeadingOnes, 10).unwrap().budget, 400_000);
        let s = default_spec(Benchmark::Sphere, 20).unwrap();
        assert_eq!(s.sigma0(), Some(2.0));
        assert_eq!(s.budget, 20_000_000);
        assert_eq!(s.eigen_floor, 1e-30);
        assert_eq!(s.target, 1e-10);
        assert_eq!(default_spec(Benchmark::Rosenbrock, 3).unwrap().sigma0(), Some(2.0));
        assert!(default_spec(Benchmark::Rosenbrock, 1).is_err());
    }

    #[test]
    fn names() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
        }
        assert_eq!("Leading-Ones".parse::<Benchmark>().unwrap(), Benchmark::LeadingOnes);
        let e = "foo".parse::<Benchmark>().unwrap_err().to_string();
        assert!(e.contains("rastrigin"));
        assert!(eval_binary(Benchmark::Sphere, &[true]).is_err());
        assert!(eval_continuous(Benchmark::OneMax, &[0.0]).is_err());
    }
}
