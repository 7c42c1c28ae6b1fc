//! The full pipeline (`K`, orbit lower bounds, refined upper bounds, ratio,
//! certificate) and the reports printed by the command-line tool.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::config::RunConfig;
use crate::dynamics::CircleMap;
use crate::error::{Error, Result};
use crate::extinction::{
    candidate_k, lower_bound_q_on_cell, upper_bound_q_on_cell, verify_upper_bound_k, KCertificate,
};
use crate::genfun::GenFamily;
use crate::interval::Interval;
use crate::lyapunov::{
    lower_bound_lambda_f_on_orbits, lower_bound_lambda_u_on_orbits, ratio_bounds, refine,
    BaseObservable, ExponentBounds, FibreObservable,
};
use crate::orbits::{find_periodic_orbits, PeriodicOrbit};
use crate::regularity::{certify, Attestation, RegularityCertificate};
use crate::simulate::{extinction_frequency, SimConfig, SimOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_K_NOT_CERTIFIED: i32 = 2;
pub const EXIT_NOT_NEGATIVE: i32 = 3;

/// Shortest decimal form with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// A binary64 printed with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt_num(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

fn pair(lo: f64, hi: f64) -> [Num; 2] {
    [Num(lo), Num(hi)]
}

/// Runs `f` on a pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Certified,
    KNotCertified,
    NotCertifiedNegative,
    NoPositiveAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Holder {
    pub k: u32,
    pub alpha: Num,
}

/// Everything the `bounds` subcommand reports.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub status: Status,
    pub k_cert: KCertificate,
    pub lambda_u: (f64, f64),
    /// Present when `K` was certified.
    pub lambda_f: Option<(f64, f64)>,
    pub ratio: Option<(f64, f64)>,
    pub regularity: Option<RegularityCertificate>,
    pub m_orbits: u32,
    pub n_iteration: u32,
    /// Set when the refinement stopped early at the deepest cell level.
    pub depth_limited: bool,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct BoundsJson {
    #[serde(rename = "lambda_F")]
    lambda_f: Option<[Num; 2]>,
    lambda_u: [Num; 2],
    ratio: Option<[Num; 2]>,
    #[serde(rename = "K")]
    k: Num,
    #[serde(rename = "K_certified")]
    k_certified: bool,
    #[serde(rename = "M")]
    m: u32,
    n_iteration: u32,
    wall_time_s: Num,
    holder: Option<Holder>,
    status: Status,
}

impl BoundsReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Certified => EXIT_OK,
            Status::KNotCertified => EXIT_K_NOT_CERTIFIED,
            Status::NotCertifiedNegative | Status::NoPositiveAlpha => EXIT_NOT_NEGATIVE,
        }
    }

    pub fn exponent_bounds(&self) -> Option<ExponentBounds> {
        self.lambda_f.map(|(f_lo, f_hi)| ExponentBounds {
            lambda_f_lo: f_lo,
            lambda_f_hi: f_hi,
            lambda_u_lo: self.lambda_u.0,
            lambda_u_hi: self.lambda_u.1,
            k_used: self.k_cert.k,
            m_orbits: self.m_orbits,
            n_iterations: self.n_iteration,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = BoundsJson {
            lambda_f: self.lambda_f.map(|(a, b)| pair(a, b)),
            lambda_u: pair(self.lambda_u.0, self.lambda_u.1),
            ratio: self.ratio.map(|(a, b)| pair(a, b)),
            k: Num(self.k_cert.k),
            k_certified: self.k_cert.certified,
            m: self.m_orbits,
            n_iteration: self.n_iteration,
            wall_time_s: Num(self.wall_time_s),
            holder: self.regularity.map(|r| Holder {
                k: r.k,
                alpha: Num(r.alpha),
            }),
            status: self.status,
        };
        serde_json::to_string(&doc).expect("report serializes")
    }
}

/// Refinement bound, accepting the still-valid bound of a run that hit the depth limit.
fn refined_bound(r: Result<crate::lyapunov::Refinement>) -> Result<(f64, bool)> {
    match r {
        Ok(r) => Ok((r.bound, false)),
        Err(Error::DepthOverflow { bound }) => Ok((bound, true)),
        Err(e) => Err(e),
    }
}

/// Two-sided bounds on `λ_u`: orbits from below, refinement from above.
pub fn base_bounds(map: &CircleMap, orbits: &[PeriodicOrbit], cfg: &RunConfig) -> Result<(f64, f64, bool)> {
    let lo = lower_bound_lambda_u_on_orbits(map, orbits).value;
    let (hi, limited) = refined_bound(refine(
        &BaseObservable { map },
        cfg.refine.delta,
        cfg.refine.n_iteration,
        cfg.refine.window,
    ))?;
    Ok((lo, hi, limited))
}

/// Two-sided bounds on `λ_F` given a certified `K`.
pub fn fibre_bounds(
    fam: &dyn GenFamily,
    map: &CircleMap,
    orbits: &[PeriodicOrbit],
    k: f64,
    cfg: &RunConfig,
) -> Result<(f64, f64, bool)> {
    let lo = lower_bound_lambda_f_on_orbits(fam, orbits, cfg.orbit.n_q).value;
    let obs = FibreObservable::new(fam, map, k, cfg.refine.n_q)?;
    let (hi, limited) = refined_bound(refine(&obs, cfg.refine.delta, cfg.refine.n_iteration, cfg.refine.window))?;
    Ok((lo, hi, limited))
}

/// Runs the whole pipeline on the calling thread pool.
pub fn run_pipeline(cfg: &RunConfig) -> Result<BoundsReport> {
    cfg.validate()?;
    let start = Instant::now();
    let fam = cfg.model.build()?;
    let map = cfg.map.build()?;

    let k_cert = candidate_k(fam.as_ref(), &map, &cfg.kcert.search())?;
    let orbits = find_periodic_orbits(&map, cfg.orbit.m, cfg.orbit.epsilon)?;
    let (u_lo, u_hi, mut depth_limited) = base_bounds(&map, &orbits, cfg)?;

    let mut report = BoundsReport {
        status: Status::KNotCertified,
        k_cert,
        lambda_u: (u_lo, u_hi),
        lambda_f: None,
        ratio: None,
        regularity: None,
        m_orbits: cfg.orbit.m,
        n_iteration: cfg.refine.n_iteration,
        depth_limited,
        wall_time_s: 0.0,
    };

    if k_cert.certified {
        let (f_lo, f_hi, limited) = fibre_bounds(fam.as_ref(), &map, &orbits, k_cert.k, cfg)?;
        depth_limited |= limited;
        report.depth_limited = depth_limited;
        report.lambda_f = Some((f_lo, f_hi));
        let bounds = report.exponent_bounds().expect("lambda_F is set");
        report.status = match ratio_bounds(&bounds) {
            Ok(r) => {
                report.ratio = Some(r);
                match certify(&bounds, &k_cert, cfg.margin, &Attestation::from_model(fam.as_ref(), &map)) {
                    Ok(c) => {
                        report.regularity = Some(c);
                        Status::Certified
                    }
                    Err(Error::NoPositiveAlpha { .. }) => Status::NoPositiveAlpha,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::NotCertifiedNegative { .. }) => Status::NotCertifiedNegative,
            Err(e) => return Err(e),
        };
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Parameters that `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Lambda,
    Omega,
    C,
    Eps,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Self::Lambda),
            "omega" => Ok(Self::Omega),
            "c" => Ok(Self::C),
            "eps" => Ok(Self::Eps),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter {s:?} (expected lambda, omega, c or eps)"
            ))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::Omega => "omega",
            Self::C => "c",
            Self::Eps => "eps",
        }
    }

    fn apply(self, cfg: &mut RunConfig, v: f64) {
        match self {
            Self::Lambda => cfg.model.lambda = v,
            Self::Omega => cfg.model.omega = v,
            Self::C => cfg.model.c = v,
            Self::Eps => cfg.map.eps = v,
        }
    }
}

/// `steps` equally spaced values from `from` to `to`, both included.
pub fn sweep_values(from: f64, to: f64, steps: u32) -> Result<Vec<f64>> {
    match steps {
        0 => Err(Error::InvalidArgument("steps must be at least 1".into())),
        1 => Ok(vec![from]),
        n => Ok((0..n)
            .map(|i| {
                if i == n - 1 {
                    to
                } else {
                    from + (to - from) * f64::from(i) / f64::from(n - 1)
                }
            })
            .collect()),
    }
}

pub const SWEEP_HEADER: &str = "lambda,lF_lo,lF_hi,lu_lo,lu_hi,ratio_lo,ratio_hi";

/// One pipeline run per value; rows leave uncertified fields empty.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<(f64, BoundsReport)>> {
    values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            param.apply(&mut c, v);
            c.validate()?;
            Ok((v, run_pipeline(&c)?))
        })
        .collect()
}

pub fn sweep_csv(param: SweepParam, rows: &[(f64, BoundsReport)]) -> String {
    let mut out = String::new();
    if param == SweepParam::Lambda {
        out.push_str(SWEEP_HEADER);
    } else {
        out.push_str(&SWEEP_HEADER.replacen("lambda", param.name(), 1));
    }
    out.push('\n');
    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    for (v, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(*v),
            opt(r.lambda_f.map(|p| p.0)),
            opt(r.lambda_f.map(|p| p.1)),
            fmt_num(r.lambda_u.0),
            fmt_num(r.lambda_u.1),
            opt(r.ratio.map(|p| p.0)),
            opt(r.ratio.map(|p| p.1)),
        );
    }
    out
}

/// `verify-k` output.
pub fn verify_k_json(cert: &KCertificate) -> String {
    #[derive(Serialize)]
    struct Doc {
        #[serde(rename = "K")]
        k: Num,
        certified: bool,
        refinement_depth: u32,
        cells_checked: u64,
    }
    serde_json::to_string(&Doc {
        k: Num(cert.k),
        certified: cert.certified,
        refinement_depth: cert.refinement_depth,
        cells_checked: cert.cells_checked,
    })
    .expect("certificate serializes")
}

pub fn verify_k(cfg: &RunConfig, c: f64, n_max: u32) -> Result<KCertificate> {
    let fam = cfg.model.build()?;
    let map = cfg.map.build()?;
    verify_upper_bound_k(fam.as_ref(), &map, c, n_max)
}

pub const QBOUNDS_HEADER: &str = "x_lo,x_hi,q_lower,q_upper";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QRow {
    pub cell: Interval,
    pub q_lower: f64,
    pub q_upper: f64,
}

/// Bounds on `q` over `grid` uniform cells of `[0, 1]` with `n` compositions.
///
/// Without a certified `K` the upper bound is the trivial `1`.
pub fn qbounds(cfg: &RunConfig, grid: u32, n: usize) -> Result<(KCertificate, Vec<QRow>)> {
    use rayon::prelude::*;
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be at least 1".into()));
    }
    let fam = cfg.model.build()?;
    let map = cfg.map.build()?;
    let k = candidate_k(fam.as_ref(), &map, &cfg.kcert.search())?;
    let rows = (0..grid)
        .into_par_iter()
        .map(|i| {
            let g = f64::from(grid);
            let cell = Interval::new(f64::from(i) / g, f64::from(i + 1) / g)?;
            let q_lower = lower_bound_q_on_cell(fam.as_ref(), &map, cell, n)?;
            let q_upper = if k.certified {
                upper_bound_q_on_cell(fam.as_ref(), &map, cell, k.k, n)?
            } else {
                1.0
            };
            Ok(QRow { cell, q_lower, q_upper })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((k, rows))
}

pub fn qbounds_csv(rows: &[QRow]) -> String {
    let mut out = format!("{QBOUNDS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(r.cell.lo()),
            fmt_num(r.cell.hi()),
            fmt_num(r.q_lower),
            fmt_num(r.q_upper)
        );
    }
    out
}

/// One line per orbit: `k j lo0 hi0 lo1 hi1 …`.
pub fn orbit_lines(orbits: &[PeriodicOrbit]) -> String {
    let mut out = String::new();
    for o in orbits {
        let _ = write!(out, "{} {}", o.period(), o.branch());
        for c in o.cells() {
            let _ = write!(out, " {} {}", fmt_num(c.lo()), fmt_num(c.hi()));
        }
        out.push('\n');
    }
    out
}

pub fn simulate(cfg: &RunConfig, sim: &SimConfig) -> Result<SimOutcome> {
    let fam = cfg.model.build()?;
    let map = cfg.map.build()?;
    extinction_frequency(fam.as_ref(), &map, sim)
}

pub fn simulate_json(out: &SimOutcome) -> String {
    #[derive(Serialize)]
    struct Doc {
        freq: Num,
        stderr: Num,
        capped_trials: u64,
    }
    serde_json::to_string(&Doc {
        freq: Num(out.freq),
        stderr: Num(out.stderr),
        capped_trials: out.capped_trials,
    })
    .expect("outcome serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::LN_2, 0.1, -0.9004770794800953, 1e-300, 5.0] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
        assert_eq!(fmt_num(f64::NEG_INFINITY), "null");
    }

    #[test]
    fn raw_numbers_in_json() {
        let s = serde_json::to_string(&[Num(0.5), Num(f64::NAN)]).unwrap();
        assert_eq!(s, "[5.0000000000000000e-1,null]");
    }

    #[test]
    fn sweep_points_include_both_ends() {
        assert_eq!(sweep_values(0.6, 1.0, 3).unwrap(), vec![0.6, 0.8, 1.0]);
        assert_eq!(sweep_values(2.0, 3.0, 1).unwrap(), vec![2.0]);
        assert!(sweep_values(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn subcritical_model_does_not_certify_k() {
        let mut cfg = RunConfig::default();
        cfg.model.lambda = -2.0;
        cfg.kcert.max_retries = 2;
        cfg.kcert.n_max = 8;
        cfg.refine.n_iteration = 5;
        cfg.orbit.m = 3;
        let r = run_pipeline(&cfg).unwrap();
        assert_eq!(r.exit_code(), EXIT_K_NOT_CERTIFIED);
        assert!(r.lambda_f.is_none());
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(json["lambda_F"].is_null());
        assert!(json["lambda_u"][0].as_f64().unwrap() > 0.69);
    }

    #[test]
    fn orbit_line_format() {
        let map = CircleMap::linear(2).unwrap();
        let orbits = find_periodic_orbits(&map, 2, 1e-10).unwrap();
        let text = orbit_lines(&orbits);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("1 0 "));
        assert_eq!(lines[1].split(' ').count(), 2 + 4);
    }
}
