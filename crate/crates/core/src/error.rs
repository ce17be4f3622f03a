use thiserror::Error;

/// Errors raised by model validation, numerics and simulation.
#[derive(Debug, Error)]
pub enum RwreError {
    #[error("row {row} of the transition matrix sums to {sum} (expected 1)")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("transition matrix entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("omega({state}) = {value} lies outside (0, 1)")]
    OmegaOutOfRange { state: usize, value: f64 },
    #[error("ellipticity violated: omega({state}) = {value} not in ({epsilon}, 1 - {epsilon})")]
    Ellipticity { state: usize, value: f64, epsilon: f64 },
    #[error("epsilon = {0} must lie in (0, 1/2)")]
    BadEpsilon(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("chain is reducible; strongly connected components: {components:?}")]
    Reducible { components: Vec<Vec<usize>> },
    #[error("no uniform minorization at m = {m}; try a larger power")]
    NoMinorization { m: usize },
    #[error("regeneration coin r = {0} must lie in (0, 1]")]
    BadCoin(f64),
    #[error("no kappa: {0}")]
    NoKappa(String),
    #[error("speed is zero; xi unbounded (Lambda(1) = {0} >= 0)")]
    ZeroSpeed(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("slow contraction: running product still {product:e} after {terms} terms")]
    SlowContraction { terms: usize, product: f64 },
    #[error("window too small: walk reached site {deepest}")]
    WindowTooSmall { deepest: i64 },
    #[error("population explosion at generation {generation}")]
    Explosion { generation: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("quadrature did not converge: error bound {bound:e} above {target:e}")]
    Quadrature { bound: f64, target: f64 },
    #[error("out of scope: {0}")]
    OutOfScope(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RwreError>;
