//! The `.tm` text format: lexer, parser and canonical serializer.

pub(crate) mod lexer;
mod parser;
mod serialize;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse, ParseResult, DEFAULT_MAX_STEPS};
pub(crate) use parser::{PResult, TokenStream, Tokens};
pub use serialize::{serialize, serialize_document, InvalidModel};
pub(crate) use serialize::quote;
