//! Candidate norms, extremality checks and Barabanov norm construction.

mod barabanov;
mod extremal;
mod lp;
mod model;

pub use barabanov::{
    barabanov_iterate, barabanov_residual, random_unit_vectors, test_directions,
    BarabanovCertificate, BarabanovConfig, BarabanovMethod,
};
pub use extremal::{
    check_extremal, classify_extremality, kozyakin_extremal_witness, log_trace, ExtremalCheck,
    Extremality, ExtremalityReport,
};
pub use model::NormModel;
