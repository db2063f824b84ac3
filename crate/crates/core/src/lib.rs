//! Equilibrium computation for pseudo-games.
//!
//! This crate holds the numerical core of the toolkit: a small reverse-mode
//! autodiff tape with multilayer perceptrons and optimizers, the pseudo-game
//! abstraction with regret and exploitability, Arrow-Debreu exchange
//! economies, the Kyoto joint-implementation game, and the solvers
//! (tâtonnement, exploitability descent and generative-adversarial training
//! of equilibrium generators).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, timing and the
//! command line live in the `pseudeq` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod exchange;
pub mod kyoto;
pub mod linalg;
pub mod math;
pub mod nn;
pub mod optim;
pub mod pseudogame;
pub mod rng;
pub mod solvers;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
