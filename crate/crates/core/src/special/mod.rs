//! Special functions behind the closed-form equilibria.

mod gamma;
mod kummer;
mod normalize;
mod wide;

pub use gamma::{ln_gamma, recip_gamma};
pub use kummer::{hyp1f1, kummer_1f1, Kummer13Args};
pub use normalize::normalize_on_grid;
