//! Near-field microwave imaging with NV-center ensembles.
//!
//! The crate covers the whole chain from geometry to quantitative Rabi maps:
//!
//! * [`scene`]: pattern masks, layer stacks, source and grid specifications,
//!   voxelization onto a (possibly graded) rectilinear mesh.
//! * [`fdtd`]: a scattered-field Yee solver with convolutional PML that
//!   extracts the steady-state magnetic phasor on a probe plane.
//! * [`oracle`]: closed-form reference fields (Hertzian dipole, Biot–Savart
//!   loop, uniform field) used to validate the solver.
//! * [`nv`]: NV ground-state resonances, lab to NV frame rotation, circular
//!   decomposition, effective Rabi frequency and Rabi-trace synthesis.
//! * [`imaging`]: synthetic camera acquisition and its inversion into a Rabi
//!   frequency map, enhancement statistics and the power linearity fit.
//!
//! Shared value types are re-exported at the crate root.

pub mod constants;
pub mod fdtd;
pub mod gridfile;
pub mod imaging;
pub mod math;
pub mod nv;
pub mod oracle;
pub mod scene;

pub use fdtd::{ComplexFieldMap, HarmonicOptions, HarmonicRun, ProbeWindow};
pub use imaging::{CameraConfig, FrameStack, RabiGrid, RabiMap, TraceGrid};
pub use nv::{DriveField, NVConfig, RabiTrace, Transition};
pub use scene::{GridSpec, LayerStack, MaterialGrid, PatternMask, Scene, SourceSpec};

/// Three-component real vector in lab coordinates.
pub type Vec3 = [f64; 3];

/// Three-component complex phasor.
pub type CVec3 = [num_complex::Complex64; 3];
