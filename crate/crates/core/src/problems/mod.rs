//! Synthetic benchmark problems, random starting points and tensor files.

mod io;
mod synthetic;

pub use io::{load_tensor, read_tensor, save_tensor, write_tensor, MAGIC};
pub use synthetic::{
    collinear_factor, derive_seed, make_synthetic, random_init, rng_for, standard_suite, true_model, ProblemInstance,
    Provenance, Purpose, SyntheticSpec, STANDARD_CLASSES,
};
