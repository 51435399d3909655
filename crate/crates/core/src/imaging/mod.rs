//! Frames, netpbm I/O, frame sequences and colour-space conversion.

mod color;
mod frame;
mod pnm;
mod sequence;

pub use color::{
    hsi_to_rgb, luminance, pixel_hsi_to_rgb, pixel_luminance, pixel_rgb_to_hsi, rgb_to_hsi, LUMA_B, LUMA_G,
    LUMA_R,
};
pub use frame::{quantize_u8, ColorSpace, Frame};
pub use pnm::{decode_pgm, decode_ppm, encode_pgm, encode_ppm};
pub use sequence::{load_sequence, FrameSequence, DEFAULT_FPS, DEFAULT_PATTERN};
