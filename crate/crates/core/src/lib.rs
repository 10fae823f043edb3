pub mod cli;
pub mod error;
pub mod fixedpoint;
pub mod ortho_oracle;
pub mod painleve;
pub mod qcore;
pub mod report;
pub mod weights;

pub use error::{Error, Result};
pub use qcore::ModelContext;
pub use report::ResidualReport;
