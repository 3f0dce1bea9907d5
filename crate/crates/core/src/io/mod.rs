//! Point-cloud file I/O: PLY (ASCII and binary) and OBJ vertices.

pub mod obj;
pub mod ply;

pub use ply::{read_ply, write_ply, PlyData, PlyEncoding};
