//! Library surface of the CLI crate: the dataset/report file formats, kept
//! importable so integration tests can exercise them directly.

pub mod io;
