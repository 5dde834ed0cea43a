//! Recursive-descent parser for `.tm` model files.
//!
//! Syntax errors are collected as diagnostics. After an error the parser
//! skips to the end of the current statement (`;` or `}`) and carries on, so
//! one typo does not hide the problems after it.

use std::collections::BTreeSet;

use super::lexer::{tokenize, Token, TokenKind};
use crate::behavior::{Behavior, ChronEdge, EdgeRef, Event, Guard, Scenario};
use crate::diagnostic::{has_errors, Code, Diagnostic, Location, SourceSpan};
use crate::model::{FlowEdge, Machine, MachineId, Model, StageKind, StageRef, Thing, ThingId, TriggerEdge};

/// Default bound for scenarios that do not declare `max_steps`.
pub const DEFAULT_MAX_STEPS: u32 = 100;

const TOP_KEYWORDS: [&str; 7] = ["machine", "thing", "flow", "trigger", "event", "chron", "scenario"];

#[derive(Debug, Clone)]
pub struct ParseResult {
    /// Present iff `diagnostics` holds no errors.
    pub model: Option<Model>,
    /// Present together with `model`; empty when the file declares no behavior.
    pub behavior: Option<Behavior>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses model text. Never panics; malformed input yields diagnostics.
pub fn parse(text: &str) -> ParseResult {
    let (tokens, diagnostics) = tokenize(text);
    let mut p = Parser {
        tokens,
        pos: 0,
        diags: diagnostics,
        model: Model::default(),
        behavior: Behavior::default(),
    };
    p.items();
    let mut diagnostics = p.diags;
    diagnostics.sort_by_key(|d| d.span());
    if has_errors(&diagnostics) {
        ParseResult {
            model: None,
            behavior: None,
            diagnostics,
        }
    } else {
        ParseResult {
            model: Some(p.model),
            behavior: Some(p.behavior),
            diagnostics,
        }
    }
}

/// Error already recorded as a diagnostic.
pub(crate) struct Reported;

pub(crate) type PResult<T> = Result<T, Reported>;

pub(crate) struct TokenStream {
    tokens: Vec<Token>,
    pos: usize,
    pub(crate) diags: Vec<Diagnostic>,
}

impl TokenStream {
    pub(crate) fn new(text: &str) -> Self {
        let (tokens, diags) = tokenize(text);
        TokenStream {
            tokens,
            pos: 0,
            diags,
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    model: Model,
    behavior: Behavior,
}

/// Token-level helpers shared with the policy parser.
pub(crate) trait Tokens {
    fn toks(&self) -> &[Token];
    fn pos_mut(&mut self) -> &mut usize;
    fn pos(&self) -> usize;
    fn report(&mut self, d: Diagnostic);

    fn peek(&self) -> &Token {
        let toks = self.toks();
        &toks[self.pos().min(toks.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Token {
        let toks = self.toks();
        &toks[(self.pos() + n).min(toks.len() - 1)]
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if t.kind != TokenKind::Eof {
            *self.pos_mut() += 1;
        }
        t
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&mut self, expected: &str) -> Reported {
        let t = self.peek().clone();
        let code = if t.kind == TokenKind::Eof {
            Code::SyntaxUnexpectedEof
        } else {
            Code::SyntaxUnexpectedToken
        };
        self.report(
            Diagnostic::error(code, format!("expected {expected}, found {}", t.kind.describe()))
                .at(Location::Span(t.span)),
        );
        Reported
    }

    fn expect(&mut self, kind: &TokenKind) -> PResult<Token> {
        if self.at(kind) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Token> {
        if self.at_keyword(kw) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn name(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().kind.clone() {
            TokenKind::Ident(s) => {
                let t = self.bump();
                Ok((s, t.span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn int(&mut self) -> PResult<u32> {
        match self.peek().kind {
            TokenKind::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek().kind.clone() {
            TokenKind::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("a string")),
        }
    }

    fn path(&mut self) -> PResult<String> {
        let (mut path, _) = self.name("a machine path")?;
        while self.eat(&TokenKind::Slash) {
            let (seg, _) = self.name("a machine name")?;
            path.push('/');
            path.push_str(&seg);
        }
        Ok(path)
    }

    fn stage_ref(&mut self) -> PResult<StageRef> {
        let path = self.path()?;
        self.expect(&TokenKind::Dot)?;
        let kind = self.stage_kind()?;
        Ok(StageRef {
            machine: MachineId(path),
            kind,
        })
    }

    fn stage_kind(&mut self) -> PResult<StageKind> {
        if let TokenKind::Ident(s) = &self.peek().kind {
            if let Some(k) = StageKind::parse(s) {
                self.bump();
                return Ok(k);
            }
        }
        Err(self.unexpected("a stage kind (create, process, receive, release, transfer)"))
    }

    fn duplicate_attr(&mut self, name: &str, span: SourceSpan) {
        self.report(
            Diagnostic::error(
                Code::SyntaxDuplicateAttribute,
                format!("attribute `{name}` is given more than once"),
            )
            .at(Location::Span(span)),
        );
    }

    /// Skips to the end of the current statement. `;` and `}` are consumed;
    /// a statement keyword in `stop_at` is left for the caller.
    fn recover(&mut self, stop_at: &[&str], consume_brace: bool) {
        loop {
            match &self.peek().kind {
                TokenKind::Eof => return,
                TokenKind::Semi => {
                    self.bump();
                    return;
                }
                TokenKind::RBrace => {
                    if consume_brace {
                        self.bump();
                    }
                    return;
                }
                TokenKind::Ident(s) if stop_at.contains(&s.as_str()) => return,
                _ => {
                    self.bump();
                }
            }
        }
    }
}

impl Tokens for Parser {
    fn toks(&self) -> &[Token] {
        &self.tokens
    }
    fn pos_mut(&mut self) -> &mut usize {
        &mut self.pos
    }
    fn pos(&self) -> usize {
        self.pos
    }
    fn report(&mut self, d: Diagnostic) {
        self.diags.push(d);
    }
}

impl Tokens for TokenStream {
    fn toks(&self) -> &[Token] {
        &self.tokens
    }
    fn pos_mut(&mut self) -> &mut usize {
        &mut self.pos
    }
    fn pos(&self) -> usize {
        self.pos
    }
    fn report(&mut self, d: Diagnostic) {
        self.diags.push(d);
    }
}

impl Parser {
    fn items(&mut self) {
        while !self.at_eof() {
            let keyword = match &self.peek().kind {
                TokenKind::Ident(s) if TOP_KEYWORDS.contains(&s.as_str()) => s.clone(),
                _ => {
                    self.unexpected("a statement (machine, thing, flow, trigger, event, chron, scenario)");
                    self.bump();
                    self.recover(&TOP_KEYWORDS, true);
                    continue;
                }
            };
            self.bump();
            let result = match keyword.as_str() {
                "machine" => self.machine(None),
                "thing" => self.thing(),
                "flow" => self.flow(),
                "trigger" => self.trigger(),
                "event" => self.event(),
                "chron" => self.chron(),
                _ => self.scenario(),
            };
            if result.is_err() {
                self.recover(&TOP_KEYWORDS, true);
            }
        }
    }

    /// After the `machine` keyword.
    fn machine(&mut self, parent: Option<&str>) -> PResult<()> {
        // A missing name is reported but the body is still parsed so that
        // errors inside it surface too.
        let name = match self.name("a machine name") {
            Ok((n, _)) => n,
            Err(_) if self.at(&TokenKind::LBrace) || self.at(&TokenKind::LBracket) => String::new(),
            Err(e) => return Err(e),
        };
        let mut machine = match parent {
            Some(p) => Machine::new(format!("{p}/{name}"), name.clone()).with_parent(p),
            None => Machine::new(name.clone(), name.clone()),
        };
        if self.eat(&TokenKind::LBracket) {
            let (mut seen_actor, mut seen_external) = (false, false);
            loop {
                let (attr, span) = self.name("`actor` or `external`")?;
                match attr.as_str() {
                    "actor" => {
                        if seen_actor {
                            self.duplicate_attr("actor", span);
                        }
                        seen_actor = true;
                        self.expect(&TokenKind::Eq)?;
                        machine.actor = Some(self.string()?);
                    }
                    "external" => {
                        if seen_external {
                            self.duplicate_attr("external", span);
                        }
                        seen_external = true;
                        machine.external = true;
                    }
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("`actor` or `external`"));
                    }
                }
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(&TokenKind::RBracket)?;
        }
        self.expect(&TokenKind::LBrace)?;
        let id = machine.id.0.clone();
        let mut children = Vec::new();
        loop {
            if self.eat(&TokenKind::RBrace) {
                break;
            }
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            if self.eat_keyword("stage") {
                match self.stage_kind() {
                    Ok(k) => {
                        machine.stages.push(k);
                        if self.expect(&TokenKind::Semi).is_err() {
                            self.recover(&["stage", "machine"], false);
                        }
                    }
                    Err(_) => self.recover(&["stage", "machine"], false),
                }
            } else if self.eat_keyword("machine") {
                let before = self.model.machines.len();
                if self.machine(Some(&id)).is_err() {
                    self.recover(&["stage", "machine"], false);
                }
                children.extend(self.model.machines.drain(before..));
            } else {
                self.unexpected("`stage`, `machine` or `}`");
                self.bump();
                self.recover(&["stage", "machine"], false);
            }
        }
        self.model.machines.push(machine);
        self.model.machines.extend(children);
        Ok(())
    }

    fn thing(&mut self) -> PResult<()> {
        let (name, _) = self.name("a thing name")?;
        let mut sensitive = false;
        if self.eat(&TokenKind::LBracket) {
            self.expect_keyword("sensitive")?;
            sensitive = true;
            self.expect(&TokenKind::RBracket)?;
        }
        self.expect(&TokenKind::Semi)?;
        self.model.things.push(Thing::new(name, sensitive));
        Ok(())
    }

    fn flow(&mut self) -> PResult<()> {
        let (thing, _) = self.name("a thing name")?;
        self.expect(&TokenKind::Colon)?;
        let from = self.stage_ref()?;
        self.expect(&TokenKind::Arrow)?;
        let to = self.stage_ref()?;
        let mut flow = FlowEdge::new(thing, from, to);
        if self.eat(&TokenKind::LBracket) {
            if self.eat_keyword("step") {
                self.expect(&TokenKind::Eq)?;
                flow.step = Some(self.int()?);
                self.eat(&TokenKind::Comma);
            }
            if self.eat_keyword("leak") {
                flow.leak = true;
            }
            if !self.at(&TokenKind::RBracket) {
                return Err(self.unexpected("`step=N`, `leak` or `]`"));
            }
            self.bump();
        }
        self.expect(&TokenKind::Semi)?;
        self.model.flows.push(flow);
        Ok(())
    }

    fn trigger(&mut self) -> PResult<()> {
        self.expect(&TokenKind::Colon)?;
        let from = self.stage_ref()?;
        self.expect(&TokenKind::FatArrow)?;
        let to = self.stage_ref()?;
        let mut trigger = TriggerEdge::new(from, to);
        if self.eat(&TokenKind::LBracket) {
            self.expect_keyword("creates")?;
            self.expect(&TokenKind::Eq)?;
            let (thing, _) = self.name("a thing name")?;
            trigger.creates = Some(ThingId(thing));
            self.expect(&TokenKind::RBracket)?;
        }
        self.expect(&TokenKind::Semi)?;
        self.model.triggers.push(trigger);
        Ok(())
    }

    fn event(&mut self) -> PResult<()> {
        let (id, _) = self.name("an event id")?;
        let mut event = Event::new(id, 0);
        if self.eat(&TokenKind::LBracket) {
            let mut seen = BTreeSet::new();
            loop {
                let (attr, span) = self.name("`time` or `label`")?;
                if !seen.insert(attr.clone()) {
                    self.duplicate_attr(&attr, span);
                }
                match attr.as_str() {
                    "time" => {
                        self.expect(&TokenKind::Eq)?;
                        event.time = self.int()?;
                    }
                    "label" => {
                        self.expect(&TokenKind::Eq)?;
                        event.label = self.string()?;
                    }
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("`time` or `label`"));
                    }
                }
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(&TokenKind::RBracket)?;
        }
        self.expect(&TokenKind::LBrace)?;
        loop {
            if self.eat(&TokenKind::RBrace) {
                break;
            }
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            if self.region_item(&mut event).is_err() {
                self.recover(&["region", "edges"], false);
            }
        }
        self.behavior.events.push(event);
        Ok(())
    }

    fn region_item(&mut self, event: &mut Event) -> PResult<()> {
        if self.eat_keyword("region") {
            self.expect(&TokenKind::Colon)?;
            loop {
                event.stages.insert(self.stage_ref()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        } else if self.eat_keyword("edges") {
            self.expect(&TokenKind::Colon)?;
            loop {
                event.edges.insert(self.edge_ref()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        } else {
            let e = self.unexpected("`region`, `edges` or `}`");
            self.bump();
            return Err(e);
        }
        self.expect(&TokenKind::Semi)?;
        Ok(())
    }

    fn edge_ref(&mut self) -> PResult<EdgeRef> {
        if self.at_keyword("step") && matches!(self.peek_at(1).kind, TokenKind::Int(_)) {
            self.bump();
            return Ok(EdgeRef::Step(self.int()?));
        }
        if matches!(self.peek().kind, TokenKind::Ident(_)) && self.peek_at(1).kind == TokenKind::Colon {
            let (thing, _) = self.name("a thing name")?;
            self.bump();
            let from = self.stage_ref()?;
            self.expect(&TokenKind::Arrow)?;
            let to = self.stage_ref()?;
            return Ok(EdgeRef::Flow {
                thing: ThingId(thing),
                from,
                to,
            });
        }
        let from = self.stage_ref()?;
        self.expect(&TokenKind::FatArrow)?;
        let to = self.stage_ref()?;
        Ok(EdgeRef::Trigger { from, to })
    }

    fn chron(&mut self) -> PResult<()> {
        self.expect(&TokenKind::Colon)?;
        let (from, _) = self.name("an event id")?;
        self.expect(&TokenKind::Arrow)?;
        let (to, _) = self.name("an event id")?;
        let mut edge = ChronEdge::new(from, to);
        if self.eat(&TokenKind::LBracket) {
            self.expect_keyword("guard")?;
            self.expect(&TokenKind::Eq)?;
            let negated = self.eat(&TokenKind::Bang);
            let (var, _) = self.name("a guard name")?;
            let guard = if negated { format!("!{var}") } else { var };
            debug_assert!(Guard::parse(&guard).is_some());
            edge.guard = Some(guard);
            self.expect(&TokenKind::RBracket)?;
        }
        self.expect(&TokenKind::Semi)?;
        self.behavior.chronology.edges.push(edge);
        Ok(())
    }

    fn scenario(&mut self) -> PResult<()> {
        let (name, name_span) = self.name("a scenario name")?;
        let mut start = None;
        let mut max_steps = None;
        self.expect(&TokenKind::LBracket)?;
        loop {
            let (attr, span) = self.name("`start` or `max_steps`")?;
            self.expect(&TokenKind::Eq)?;
            match attr.as_str() {
                "start" => {
                    if start.is_some() {
                        self.duplicate_attr("start", span);
                    }
                    start = Some(self.name("an event id")?.0);
                }
                "max_steps" => {
                    if max_steps.is_some() {
                        self.duplicate_attr("max_steps", span);
                    }
                    max_steps = Some(self.int()?);
                }
                _ => {
                    self.pos -= 2;
                    return Err(self.unexpected("`start` or `max_steps`"));
                }
            }
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        self.expect(&TokenKind::RBracket)?;
        let Some(start) = start else {
            self.report(
                Diagnostic::error(
                    Code::SyntaxUnexpectedToken,
                    format!("scenario `{name}` needs a `start` attribute"),
                )
                .at(Location::Span(name_span)),
            );
            return Err(Reported);
        };
        let mut scenario = Scenario::new(name, start, max_steps.unwrap_or(DEFAULT_MAX_STEPS));
        self.expect(&TokenKind::LBrace)?;
        loop {
            if self.eat(&TokenKind::RBrace) {
                break;
            }
            let (var, _) = self.name("a guard name or `}`")?;
            self.expect(&TokenKind::Eq)?;
            let value = if self.eat_keyword("true") {
                true
            } else if self.eat_keyword("false") {
                false
            } else {
                return Err(self.unexpected("`true` or `false`"));
            };
            self.expect(&TokenKind::Semi)?;
            scenario.guard_choices.insert(var, value);
        }
        self.behavior.scenarios.push(scenario);
        Ok(())
    }
}
