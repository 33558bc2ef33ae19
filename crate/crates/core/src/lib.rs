pub mod ast;
pub mod belnap;
pub mod blp;
pub mod cli;
pub mod engine;
pub mod gen;
pub mod lattice;
pub mod matcher;
pub mod parser;
pub mod policy_eval;
pub mod symbol;
