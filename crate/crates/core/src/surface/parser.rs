use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use super::lexer::{tokenize, Tok, Token};
use super::{Diagnostic, Diagnostics, SourceFile, Span};
use crate::syntax::{free_names, Label, Name, Prefix, Process, QualifiedRole, RestrictionAnnotation, Role};
use crate::types::{Behavioral, Message, Polarity, SharedType};

const KEYWORDS: &[&str] = &[
    "new", "lin", "sh", "end", "dia", "tau", "role", "typedef", "shared", "linear", "proc",
];

pub fn parse_process(src: &str) -> Result<Process, Diagnostics> {
    let toks = tokenize(src)?;
    let mut p = Parser::new(&toks, None);
    let proc = p.proc()?;
    p.expect_eof()?;
    Ok(proc)
}

pub fn parse_type(src: &str) -> Result<Behavioral, Diagnostics> {
    let toks = tokenize(src)?;
    let mut p = Parser::new(&toks, None);
    let b = p.btype()?;
    p.expect_eof()?;
    Ok(b)
}

pub fn parse_file(src: &str) -> Result<SourceFile, Diagnostics> {
    let toks = tokenize(src)?;
    let items = split_items(&toks)?;

    let mut diags = Vec::new();
    let mut typedefs = Typedefs::default();
    for item in &items {
        if item.kind == "typedef" {
            if typedefs.ranges.contains_key(&item.name) {
                diags.push(Diagnostic::error(
                    format!("duplicate typedef `{}`", item.name),
                    item.name_span,
                ));
                continue;
            }
            typedefs.order.push(item.name.clone());
            typedefs
                .ranges
                .insert(item.name.clone(), (item.body.clone(), item.name_span));
        }
    }

    let mut file = SourceFile::default();
    for name in typedefs.order.clone() {
        match typedefs.resolve(&toks, &name, typedefs.ranges[&name].1) {
            Ok(b) => file.typedefs.push((name, b)),
            Err(d) => diags.push(d),
        }
    }
    if !diags.is_empty() {
        return Err(Diagnostics(diags));
    }

    let mut seen_channels: HashMap<String, &'static str> = HashMap::new();
    let mut seen_procs = BTreeSet::new();
    for item in &items {
        let body = &toks[item.body.clone()];
        let mut p = Parser::new(body, Some((&typedefs, &toks)));
        match item.kind.as_str() {
            "typedef" => {}
            "shared" | "linear" => {
                let section = if item.kind == "shared" { "shared" } else { "linear" };
                if let Some(prev) = seen_channels.insert(item.name.clone(), section) {
                    let message = if prev == section {
                        format!("duplicate {section} declaration `{}`", item.name)
                    } else {
                        format!("`{}` declared both linear and shared", item.name)
                    };
                    diags.push(Diagnostic::error(message, item.name_span));
                    continue;
                }
                let name = Name::new(item.name.as_str());
                let parsed = if section == "shared" {
                    p.shared_type()
                        .and_then(|t| p.expect_eof().map(|_| t))
                        .map(|t| file.shared.push((name, t)))
                } else {
                    p.btype()
                        .and_then(|b| p.expect_eof().map(|_| b))
                        .map(|b| file.linear.push((name, b)))
                };
                if let Err(d) = parsed {
                    diags.push(d);
                }
            }
            "proc" => {
                if !seen_procs.insert(item.name.clone()) {
                    diags.push(Diagnostic::error(
                        format!("duplicate proc `{}`", item.name),
                        item.name_span,
                    ));
                    continue;
                }
                match p.proc().and_then(|q| p.expect_eof().map(|_| q)) {
                    Ok(q) => file.procs.push((item.name.clone(), q)),
                    Err(d) => diags.push(d),
                }
            }
            _ => unreachable!(),
        }
    }

    for (name, proc) in &file.procs {
        let span = items
            .iter()
            .find(|i| i.kind == "proc" && &i.name == name)
            .map(|i| i.name_span)
            .expect("proc item");
        for free in free_names(proc) {
            if !seen_channels.contains_key(free.as_str()) {
                diags.push(Diagnostic::error(
                    format!("undeclared free name `{free}` in proc `{name}`"),
                    span,
                ));
            }
        }
    }

    if diags.is_empty() {
        Ok(file)
    } else {
        Err(Diagnostics(diags))
    }
}

struct Item {
    kind: String,
    name: String,
    name_span: Span,
    body: std::ops::Range<usize>,
}

/// Cuts the token stream into `kind NAME (= | :) body ;` items.
fn split_items(toks: &[Token]) -> Result<Vec<Item>, Diagnostic> {
    let mut items = Vec::new();
    let mut i = 0;
    loop {
        let kind = match &toks[i].tok {
            Tok::Eof => return Ok(items),
            Tok::Ident(k) if ["typedef", "shared", "linear", "proc"].contains(&k.as_str()) => {
                k.clone()
            }
            other => {
                return Err(Diagnostic::error(
                    format!(
                        "expected `typedef`, `shared`, `linear` or `proc`, found {}",
                        other.describe()
                    ),
                    toks[i].span,
                ))
            }
        };
        i += 1;
        let (name, name_span) = match &toks[i].tok {
            Tok::Ident(n) if !KEYWORDS.contains(&n.as_str()) => (n.clone(), toks[i].span),
            other => {
                return Err(Diagnostic::error(
                    format!("expected a name after `{kind}`, found {}", other.describe()),
                    toks[i].span,
                ))
            }
        };
        i += 1;
        let sep = if kind == "typedef" || kind == "proc" {
            Tok::Eq
        } else {
            Tok::Colon
        };
        if toks[i].tok != sep {
            return Err(Diagnostic::error(
                format!("expected `{}`, found {}", if sep == Tok::Eq { "=" } else { ":" }, toks[i].tok.describe()),
                toks[i].span,
            ));
        }
        i += 1;
        let start = i;
        while toks[i].tok != Tok::Semi {
            if toks[i].tok == Tok::Eof {
                return Err(Diagnostic::error(
                    format!("missing `;` after {kind} `{name}`"),
                    toks[i].span,
                ));
            }
            i += 1;
        }
        items.push(Item {
            kind,
            name,
            name_span,
            body: start..i,
        });
        i += 1;
    }
}

#[derive(Default)]
struct Typedefs {
    order: Vec<String>,
    ranges: HashMap<String, (std::ops::Range<usize>, Span)>,
    resolved: RefCell<HashMap<String, Behavioral>>,
    active: RefCell<Vec<String>>,
}

impl Typedefs {
    fn resolve(&self, toks: &[Token], name: &str, at: Span) -> Result<Behavioral, Diagnostic> {
        if let Some(b) = self.resolved.borrow().get(name) {
            return Ok(b.clone());
        }
        let Some((range, _)) = self.ranges.get(name) else {
            return Err(Diagnostic::error(format!("unknown typedef `{name}`"), at));
        };
        if self.active.borrow().iter().any(|n| n == name) {
            return Err(Diagnostic::error(format!("cyclic typedef `{name}`"), at));
        }
        self.active.borrow_mut().push(name.to_string());
        let mut p = Parser::new(&toks[range.clone()], Some((self, toks)));
        let result = p.btype().and_then(|b| p.expect_eof().map(|_| b));
        self.active.borrow_mut().pop();
        let b = result?;
        self.resolved
            .borrow_mut()
            .insert(name.to_string(), b.clone());
        Ok(b)
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    typedefs: Option<(&'a Typedefs, &'a [Token])>,
    eof: Token,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token], typedefs: Option<(&'a Typedefs, &'a [Token])>) -> Self {
        let eof_span = match toks.last() {
            Some(t) if t.tok == Tok::Eof => t.span,
            Some(t) => Span::new(t.span.line, t.span.column + t.span.length, 0),
            None => Span::new(1, 1, 0),
        };
        Parser {
            toks,
            pos: 0,
            typedefs,
            eof: Token {
                tok: Tok::Eof,
                span: eof_span,
            },
        }
    }

    fn peek(&self) -> &Token {
        self.toks.get(self.pos).unwrap_or(&self.eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn unexpected(&self, what: &str) -> Diagnostic {
        let t = self.peek();
        Diagnostic::error(format!("expected {what}, found {}", t.tok.describe()), t.span)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Token> {
        if self.at(&tok) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if self.at(&Tok::Eof) {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t.span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn name(&mut self) -> PResult<Name> {
        self.ident("a channel name").map(|(s, _)| Name::new(s))
    }

    fn label(&mut self) -> PResult<Label> {
        self.ident("a label").map(|(s, _)| Label::new(s))
    }

    fn role(&mut self) -> PResult<Role> {
        self.ident("a role").map(|(s, _)| Role::new(s))
    }

    // ---- processes

    fn proc(&mut self) -> PResult<Process> {
        let mut acc = self.seq()?;
        while self.at(&Tok::Pipe) {
            self.bump();
            let next = self.seq()?;
            acc = Process::par(acc, next);
        }
        Ok(acc)
    }

    fn seq(&mut self) -> PResult<Process> {
        match self.peek().tok.clone() {
            Tok::Zero => {
                self.bump();
                Ok(Process::Nil)
            }
            Tok::LParen => {
                self.bump();
                if self.at_keyword("new") {
                    let (name, ann) = self.restriction_head()?;
                    if self.at(&Tok::RParen) {
                        // `(new a) P`
                        self.bump();
                        let body = self.seq()?;
                        return Ok(Process::restrict(name, ann, body));
                    }
                    let mut acc = self.restriction_body(name, ann)?;
                    while self.at(&Tok::Pipe) {
                        self.bump();
                        let next = self.seq()?;
                        acc = Process::par(acc, next);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(acc);
                }
                let inner = self.proc()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(s) if s == "new" => {
                let (name, ann) = self.restriction_head()?;
                self.restriction_body(name, ann)
            }
            Tok::Ident(_) => {
                let prefix = self.prefix()?;
                self.expect(Tok::Dot, "`.` after a prefix")?;
                let cont = self.seq()?;
                Ok(Process::act(prefix, cont))
            }
            _ => Err(self.unexpected("a process")),
        }
    }

    fn restriction_head(&mut self) -> PResult<(Name, Option<RestrictionAnnotation>)> {
        self.bump();
        let name = self.name()?;
        if !self.at(&Tok::Colon) {
            return Ok((name, None));
        }
        self.bump();
        let ann = if self.at_keyword("lin") {
            self.bump();
            RestrictionAnnotation::Linear(self.btype()?)
        } else if self.at_keyword("sh") {
            self.bump();
            RestrictionAnnotation::Shared(self.shared_type()?)
        } else {
            return Err(self.unexpected("`lin` or `sh`"));
        };
        Ok((name, Some(ann)))
    }

    fn restriction_body(
        &mut self,
        name: Name,
        ann: Option<RestrictionAnnotation>,
    ) -> PResult<Process> {
        let body = if self.at(&Tok::Dot) {
            self.bump();
            self.seq()?
        } else if self.at(&Tok::LParen) {
            self.bump();
            let inner = self.proc()?;
            self.expect(Tok::RParen, "`)`")?;
            inner
        } else {
            return Err(self.unexpected("`.` or `(` after a restriction"));
        };
        Ok(Process::restrict(name, ann, body))
    }

    fn qualified(&mut self) -> PResult<QualifiedRole> {
        let role = |p: &mut Self| p.role();
        if self.at(&Tok::Plus) {
            self.bump();
            Ok(QualifiedRole::authorized(role(self)?))
        } else if self.at(&Tok::Minus) {
            self.bump();
            Ok(QualifiedRole::unauthorized(role(self)?))
        } else {
            Err(self.unexpected("`+` or `-`"))
        }
    }

    fn prefix(&mut self) -> PResult<Prefix> {
        let subject = self.name()?;
        let output = if self.at(&Tok::Bang) {
            true
        } else if self.at(&Tok::Question) {
            false
        } else {
            return Err(self.unexpected("`!` or `?`"));
        };
        self.bump();
        let brace = self.expect(Tok::LBrace, "`{`")?;
        let who = self.qualified()?;
        if !self.at(&Tok::RBrace) {
            return Err(Diagnostic::error("unclosed qualification brace", brace.span));
        }
        self.bump();
        let label = self.label()?;
        if self.at(&Tok::LParen) {
            self.bump();
            let obj = if self.at(&Tok::RParen) {
                None
            } else {
                Some(self.name()?)
            };
            self.expect(Tok::RParen, "`)`")?;
            return Ok(if output {
                Prefix::SendName {
                    subject,
                    who,
                    label,
                    object: obj,
                }
            } else {
                Prefix::RecvName {
                    subject,
                    who,
                    label,
                    binder: obj,
                }
            });
        }
        self.expect(Tok::Lt, "`(` or `<`")?;
        if self.at(&Tok::Gt) {
            // `<>` is an empty payload, same as `()`
            self.bump();
            return Ok(if output {
                Prefix::SendName {
                    subject,
                    who,
                    label,
                    object: None,
                }
            } else {
                Prefix::RecvName {
                    subject,
                    who,
                    label,
                    binder: None,
                }
            });
        }
        let prefix = if output {
            Prefix::SendAuth {
                subject,
                who,
                label,
                object: self.qualified()?,
            }
        } else {
            Prefix::RecvAuth {
                subject,
                who,
                label,
                object: self.role()?,
            }
        };
        self.expect(Tok::Gt, "`>`")?;
        Ok(prefix)
    }

    // ---- types

    fn btype(&mut self) -> PResult<Behavioral> {
        let mut parts = vec![self.seq_type()?];
        while self.at(&Tok::Pipe) {
            self.bump();
            parts.push(self.seq_type()?);
        }
        Ok(Behavioral::par_all(parts))
    }

    fn seq_type(&mut self) -> PResult<Behavioral> {
        match self.peek().tok.clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.btype()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Bang | Tok::Question => {
                let out = self.at(&Tok::Bang);
                self.bump();
                let r = self.role()?;
                let pol = if out { Polarity::Out(r) } else { Polarity::In(r) };
                self.prefixed_type(pol)
            }
            Tok::Ident(s) => match s.as_str() {
                "end" => {
                    self.bump();
                    Ok(Behavioral::End)
                }
                "dia" => {
                    self.bump();
                    Ok(Behavioral::sometime(self.seq_type()?))
                }
                "tau" => {
                    self.bump();
                    let sender = self.role()?;
                    let receiver = self.role()?;
                    self.prefixed_type(Polarity::Sync { sender, receiver })
                }
                _ => {
                    let (name, span) = self.ident("a type")?;
                    match self.typedefs {
                        Some((defs, toks)) => defs.resolve(toks, &name, span),
                        None => Err(Diagnostic::error(format!("unknown typedef `{name}`"), span)),
                    }
                }
            },
            _ => Err(self.unexpected("a type")),
        }
    }

    fn prefixed_type(&mut self, pol: Polarity) -> PResult<Behavioral> {
        let label = self.label()?;
        self.expect(Tok::LParen, "`(`")?;
        let msg = self.message()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Dot, "`.` after a type prefix")?;
        let cont = self.seq_type()?;
        Ok(Behavioral::prefixed(pol, label, msg, cont))
    }

    fn message(&mut self) -> PResult<Message> {
        if self.at_keyword("role") {
            self.bump();
            return Ok(Message::Role(self.role()?));
        }
        if self.at_keyword("sh") {
            self.bump();
            return Ok(Message::Sh(self.shared_type()?));
        }
        Ok(Message::Beh(self.btype()?))
    }

    fn shared_type(&mut self) -> PResult<SharedType> {
        let label = self.label()?;
        self.expect(Tok::LParen, "`(`")?;
        let carried = self.btype()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(SharedType::new(label, carried))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_error(r: Result<impl std::fmt::Debug, Diagnostics>) -> Diagnostic {
        r.unwrap_err().0.remove(0)
    }

    #[test]
    fn process_examples() {
        assert_eq!(parse_process("0").unwrap(), Process::Nil);
        let p = parse_process("a?{+r}l2(c).c?{+r}l1<s>.c?{-s}l3().0").unwrap();
        let Process::Act { prefix, cont } = &p else {
            panic!("expected a prefix")
        };
        assert_eq!(
            prefix,
            &Prefix::RecvName {
                subject: Name::new("a"),
                who: QualifiedRole::authorized("r"),
                label: Label::new("l2"),
                binder: Some(Name::new("c")),
            }
        );
        assert!(matches!(
            &**cont,
            Process::Act {
                prefix: Prefix::RecvAuth { .. },
                ..
            }
        ));
    }

    #[test]
    fn unclosed_brace_is_reported_at_the_brace() {
        let d = first_error(parse_process("a!{+q l(b).0"));
        assert_eq!(d.message, "unclosed qualification brace");
        assert_eq!(d.span, Span::new(1, 3, 1));
    }

    #[test]
    fn precedence_of_dot_and_bar() {
        let p = parse_process("a!{+q}l().0 | b!{+q}m().0 | 0").unwrap();
        let Process::Par(left, right) = p else {
            panic!("expected par")
        };
        assert_eq!(*right, Process::Nil);
        assert!(matches!(*left, Process::Par(..)));

        let scoped = parse_process("new b . b!{+q}l().0 | 0").unwrap();
        assert!(matches!(scoped, Process::Par(..)));
        let wide = parse_process("new b (b!{+q}l().0 | 0)").unwrap();
        assert!(matches!(wide, Process::Restrict { .. }));
        let prefixed = parse_process("(new b)(b!{+q}l3<>.0 | b?{-s}l3().0)").unwrap();
        assert!(matches!(prefixed, Process::Restrict { .. }));
        let grouped = parse_process("(new b . b!{+q}l().0 | 0)").unwrap();
        assert!(matches!(grouped, Process::Par(..)));
    }

    #[test]
    fn type_examples() {
        assert_eq!(parse_type("end").unwrap(), Behavioral::End);
        let b = parse_type("tau q r l1(role s).tau q s l3(end).end").unwrap();
        let Behavioral::Prefixed { pol, msg, .. } = &b else {
            panic!("expected prefix")
        };
        assert!(pol.is_sync());
        assert_eq!(**msg, Message::Role(Role::new("s")));
        let d = parse_type("dia !e extend(end).?e final(end).end").unwrap();
        assert!(matches!(d, Behavioral::Sometime(_)));
        assert!(parse_type("Unknown").is_err());
    }

    #[test]
    fn file_examples() {
        let f = parse_file(
            "linear b : tau q r l1(role s).tau q s l3(end).end;\n\
             proc main = b!{+q}l1<+s>.b!{+q}l3().0 | b?{+r}l1<s>.b?{-s}l3().0;",
        )
        .unwrap();
        assert_eq!(f.linear.len(), 1);
        assert_eq!(f.procs.len(), 1);
        assert_eq!(parse_file("").unwrap(), SourceFile::default());
        assert_eq!(parse_file("// only a comment\n").unwrap(), SourceFile::default());

        let d = first_error(parse_file("typedef X = Y; typedef Y = X;"));
        assert!(d.message.starts_with("cyclic typedef"), "{}", d.message);

        let with_alias = parse_file(
            "typedef T = !q l(end).end; linear a : dia T; proc main = a!{+q}l().0;",
        )
        .unwrap();
        assert_eq!(
            with_alias.linear[0].1,
            parse_type("dia !q l(end).end").unwrap()
        );
    }

    #[test]
    fn file_load_errors() {
        let d = first_error(parse_file("linear a : Nope;"));
        assert!(d.message.starts_with("unknown typedef"));
        let d = first_error(parse_file("linear a : end; linear a : end;"));
        assert!(d.message.starts_with("duplicate linear"));
        let d = first_error(parse_file("linear a : end; shared a : l(end);"));
        assert!(d.message.contains("both linear and shared"));
        let d = first_error(parse_file("proc main = a!{+q}l().0;"));
        assert!(d.message.starts_with("undeclared free name `a`"));
        let d = first_error(parse_file("proc main = 0"));
        assert!(d.message.starts_with("missing `;`"));
    }
}
