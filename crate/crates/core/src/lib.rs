pub mod cli;
pub mod conv;
pub mod equivalence;
pub mod error;
pub mod evidence;
pub mod fc;
pub mod ldp;
pub mod linalg;
pub mod mixing;
pub mod posterior;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod verify;
pub mod wishart;

pub use error::{Error, Result};
pub use linalg::{CholeskyFactor, SpdMatrix};
pub use mixing::MixingSample;
pub use rng::RngStream;
