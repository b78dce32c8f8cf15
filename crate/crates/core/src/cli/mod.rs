pub mod commands;
pub mod config;
pub mod svg;
pub mod trace_csv;
