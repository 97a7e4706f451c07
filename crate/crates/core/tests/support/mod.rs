pub mod fd;
pub mod oracles;
pub mod sequences;
