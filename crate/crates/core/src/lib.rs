//! Clearing and regulation engine for financial networks.

pub mod network;
pub mod returns;
pub mod clearing;
pub mod equity;
pub mod game;
pub mod centrality;
pub mod regulation;
pub mod replicate;
pub mod cli;
