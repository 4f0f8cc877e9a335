//! Task bank, Iowa decks and the evaluation protocols that drive agents through them.

pub mod bank;
pub mod iowa;
pub mod protocols;
