//! Dense matrices, the per-instance MLP with hand-written backward pass,
//! Adam, seeded randomness and a finite-difference checker.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;
mod prng;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::finite_diff_check;
pub use matrix::Matrix;
pub use mlp::{xavier_init, Activation, Layer, LayerGrads, Mlp, MlpCache, MlpGrads};
pub use prng::Prng;

/// Logistic sigmoid, evaluated without overflow for large |z|.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
