//! Maass cusp forms on deformable one-cusp Fuchsian groups.
//!
//! The crate locates Maass forms on the groups `Γ₂,₂,₂(a,b)` and
//! `Γ₂,₂,₂,₂(a,b,c,d)` by least-squares collocation of a truncated Fourier
//! expansion, and follows each form along deformations of the group.
//!
//! Module map:
//!
//! * [`hyperbolic`]: points of the upper half-plane and Möbius maps.
//! * [`group`]: the two deformable families, their arithmetic points and symmetries.
//! * [`bessel`]: `K_{iR}(u)` by quadrature on a shifted contour.
//! * [`automorphy`]: collocation points, the linear system and its QR solve.
//! * [`search`]: residual scans, refinement and parity.
//! * [`deform`]: predictor-corrector tracking of forms through parameter space.
//! * [`verify`]: Hecke, realness, size and constant-term checks.
//! * [`io`]: run configuration and the JSON-lines record format.

pub mod automorphy;
pub mod bessel;
pub mod deform;
pub mod error;
pub mod group;
pub mod hyperbolic;
pub mod io;
pub mod search;
pub mod verify;

pub use automorphy::{
    assemble, choose_points, solve, CollocationSet, Detector, LinearSystem, Mode, Setup,
    SolveResult, SolverSettings,
};
pub use bessel::{truncation_level, BesselEvaluator};
pub use deform::{DeformationCurve, StepPolicy, Termination};
pub use error::{MaassError, Result};
pub use group::{Character, Family, GroupPresentation, Signature};
pub use hyperbolic::{rotation_generator, Moebius, UpperHalfPoint};
pub use search::{MaassCandidate, Parity};
pub use verify::VerificationReport;
