//! `.tmp` policy files.
//!
//! ```text
//! sensitive Transaction;
//! authorize Transaction: IssuerBank/SwitchServer, IssuerBank/CoreDatabase;
//! sink IssuerBank/Messenger;
//! triggers on;
//! ```
//!
//! Names are bound against a model: things by name, machines by path.

use super::Policy;
use crate::diagnostic::{has_errors, Code, Diagnostic, Location, SourceSpan};
use crate::dsl::lexer::TokenKind;
use crate::dsl::{PResult, TokenStream, Tokens};
use crate::model::{resolve_path, MachineId, Model, ThingId};

const KEYWORDS: [&str; 4] = ["sensitive", "authorize", "sink", "triggers"];

#[derive(Debug, Clone)]
pub struct PolicyResult {
    /// Present iff `diagnostics` holds no errors.
    pub policy: Option<Policy>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn parse_policy(text: &str, model: &Model) -> PolicyResult {
    let mut p = PolicyParser {
        ts: TokenStream::new(text),
        model,
        policy: Policy::default(),
        triggers_seen: None,
        authorized_spans: Vec::new(),
    };
    while !p.ts.at_eof() {
        if p.statement().is_err() {
            p.ts.recover(&KEYWORDS, true);
        }
    }
    p.check_sensitivity();
    let mut diagnostics = p.ts.diags;
    diagnostics.sort_by_key(|d| d.span());
    let policy = (!has_errors(&diagnostics)).then_some(p.policy);
    PolicyResult {
        policy,
        diagnostics,
    }
}

struct PolicyParser<'m> {
    ts: TokenStream,
    model: &'m Model,
    policy: Policy,
    triggers_seen: Option<SourceSpan>,
    authorized_spans: Vec<(ThingId, SourceSpan)>,
}

impl PolicyParser<'_> {
    fn statement(&mut self) -> PResult<()> {
        let kw = match &self.ts.peek().kind {
            TokenKind::Ident(s) if KEYWORDS.contains(&s.as_str()) => s.clone(),
            _ => return Err(self.ts.unexpected("`sensitive`, `authorize`, `sink` or `triggers`")),
        };
        let kw_span = self.ts.bump().span;
        match kw.as_str() {
            "sensitive" => loop {
                if let Some(t) = self.thing()? {
                    self.policy.sensitive.insert(t);
                }
                if !self.ts.eat(&TokenKind::Comma) {
                    break;
                }
            },
            "authorize" => {
                let span = self.ts.peek().span;
                let thing = self.thing()?;
                self.ts.expect(&TokenKind::Colon)?;
                let mut machines = Vec::new();
                loop {
                    if let Some(m) = self.machine()? {
                        machines.push(m);
                    }
                    if !self.ts.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                if let Some(t) = thing {
                    self.authorized_spans.push((t.clone(), span));
                    self.policy.authorized.entry(t).or_default().extend(machines);
                }
            }
            "sink" => loop {
                if let Some(m) = self.machine()? {
                    self.policy.declared_sinks.insert(m);
                }
                if !self.ts.eat(&TokenKind::Comma) {
                    break;
                }
            },
            _ => {
                let on = if self.ts.eat_keyword("on") {
                    true
                } else if self.ts.eat_keyword("off") {
                    false
                } else {
                    return Err(self.ts.unexpected("`on` or `off`"));
                };
                if self.triggers_seen.is_some() {
                    self.ts.duplicate_attr("triggers", kw_span);
                }
                self.triggers_seen = Some(kw_span);
                self.policy.propagate_triggers = on;
            }
        }
        self.ts.expect(&TokenKind::Semi)?;
        Ok(())
    }

    /// `None` when the name is well-formed but unknown; that is reported
    /// and parsing continues.
    fn thing(&mut self) -> PResult<Option<ThingId>> {
        let (name, span) = self.ts.name("a thing name")?;
        let found = self
            .model
            .things
            .iter()
            .find(|t| t.name == name)
            .or_else(|| self.model.things.iter().find(|t| t.id.as_str() == name));
        match found {
            Some(t) => Ok(Some(t.id.clone())),
            None => {
                self.ts.report(
                    Diagnostic::error(Code::PolicyUnknownThing, format!("unknown thing `{name}`"))
                        .at(Location::Span(span)),
                );
                Ok(None)
            }
        }
    }

    fn machine(&mut self) -> PResult<Option<MachineId>> {
        let start = self.ts.peek().span;
        let path = self.ts.path()?;
        match resolve_path(self.model, &path) {
            Some(m) => Ok(Some(m.id.clone())),
            None => {
                let span = SourceSpan::new(start.line, start.column, path.chars().count() as u32);
                self.ts.report(
                    Diagnostic::error(Code::PolicyUnknownMachine, format!("unknown machine `{path}`"))
                        .at(Location::Span(span)),
                );
                Ok(None)
            }
        }
    }

    fn check_sensitivity(&mut self) {
        for (t, span) in std::mem::take(&mut self.authorized_spans) {
            if !self.policy.is_sensitive(self.model, &t) {
                self.ts.report(
                    Diagnostic::error(
                        Code::PolicyNotSensitive,
                        format!("`{t}` is authorized but neither the model nor the policy marks it sensitive"),
                    )
                    .at(Location::Span(span)),
                );
            }
        }
    }
}
