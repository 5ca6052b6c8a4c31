pub mod oracles;
pub mod desk;
pub mod checks;
