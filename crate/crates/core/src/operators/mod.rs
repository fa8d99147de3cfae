//! Discretized operators: axial transforms, circular means, Volterra
//! matrices, the forward models and the cone transform.

pub mod circular;
pub mod cone;
pub mod fft;
pub mod forward;
pub mod grid;
pub mod volterra;

pub use circular::CircularMean;
pub use cone::{cone_forward, cone_slice_recover};
pub use fft::{axial_fft, axial_ifft, spectral_sinogram};
pub use forward::{forward_project, forward_project_direct, DirectQuadrature, FactoredModel};
pub use grid::{
    SinoGrid, Sinogram, SpectralSinogram, SpectralSlice, UniformGrid, Volume, VolumeGrid,
};
pub use volterra::{volterra_matrix, VolterraMatrix};
