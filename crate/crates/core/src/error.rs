use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval endpoints [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("division by an interval containing zero")]
    DivisionByZeroInterval,
    #[error("logarithm of an interval reaching down to {lo}")]
    LogNonPositive { lo: f64 },
    #[error("cannot split the degenerate interval [{lo}, {hi}]")]
    DegenerateInterval { lo: f64, hi: f64 },
    #[error("floating-point overflow while evaluating {0}")]
    Overflow(&'static str),
    #[error("interval width {width} exceeds one full turn of the circle")]
    WidthOverflow { width: f64 },
    #[error("invalid circle map: {0}")]
    InvalidMap(String),
    #[error("invalid generating-function family: {0}")]
    InvalidFamily(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot certify a bracket of width < {epsilon} for period {period}, branch {branch}")]
    EpsilonTooSmall { period: u32, branch: u64, epsilon: f64 },
    #[error("primitive period of branch {branch} (period {period}) is undecided at working precision")]
    PrimitivityUndecided { period: u32, branch: u64 },
    #[error("every cell selected for refinement sits at the maximum dyadic depth (current bound {bound})")]
    DepthOverflow { bound: f64 },
    #[error("fibre exponent is not certified negative (upper bound {lambda_f_hi})")]
    NotCertifiedNegative { lambda_f_hi: f64 },
    #[error("no positive Hölder exponent fits below ratio {ratio_lo}")]
    NoPositiveAlpha { ratio_lo: f64 },
    #[error("the reproduction family does not provide an offspring sampler")]
    UnsupportedSampling,
    #[error("configuration error: {0}")]
    Config(String),
}
