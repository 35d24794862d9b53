pub mod config;
pub mod cli;
pub mod corpus;
pub mod expl_eval;
pub mod rank_eval;
pub mod ratings;
pub mod schema;
pub mod service;
pub mod shortlist;
pub mod synth;
pub mod text;
pub mod text_align;
