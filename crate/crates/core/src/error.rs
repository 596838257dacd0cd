use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite state at t = {t}: the flow blew up or the potential is ill-behaved")]
    NonFinite { t: f64 },

    #[error("derivative check failed for {what} at {point:?}: relative error {rel_err:.3e}")]
    InconsistentDerivative {
        what: &'static str,
        point: Vec<f64>,
        rel_err: f64,
    },

    #[error("preimage {y:?} has Jacobian {jacobian:.3e} below the caustic threshold")]
    CausticProximity { y: Vec<f64>, jacobian: f64 },

    #[error("no Newton start converged to a preimage of {x:?}")]
    NoRoot { x: Vec<f64> },

    #[error("non-transversal caustic crossing at s = {s}")]
    NonTransversalCrossing { s: f64 },

    #[error("point lies on the caustic: |1 + t*lambda| or |det DF| = {margin:.3e}")]
    OnCaustic { margin: f64 },

    #[error("blocks do not commute: max |AB - BA| = {defect:.3e}")]
    NotCommuting { defect: f64 },

    #[error("warm-started Newton jumped to another branch near {x:?}")]
    BranchJump { x: Vec<f64> },

    #[error("mass fraction {fraction:.3e} reached the boundary shell at t = {t}")]
    BoundaryContamination { t: f64, fraction: f64 },

    #[error("quadrature needs more than {budget} nodes to resolve the oscillations")]
    UnderResolved { budget: usize },

    #[error("correlation window clipped by the domain edge (edge magnitude {edge:.3e})")]
    WindowClipped { edge: f64 },

    #[error("branch momenta {a} and {b} are closer than twice the window width")]
    OverlappingBranches { a: f64, b: f64 },
}
