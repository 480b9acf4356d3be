//! Zeros of heat-evolved polynomial powers `exp(-(t/2N)∂²) ∏(z-λ_j)^{nα_j}`
//! at finite degree, and the saddle-point description of their limiting
//! zero distribution.

pub mod dynamics;
pub mod measure;
pub mod mp;
pub mod plot;
pub mod polyheat;
pub mod roots;
pub mod relevance;
pub mod saddle;
pub mod verify;
