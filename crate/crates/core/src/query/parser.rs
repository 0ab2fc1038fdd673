use std::collections::BTreeMap;

use super::{Query, QueryError, QueryTerm, TriplePattern};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    FullIri(String),
    Prefixed(String, String),
    PrefixLabel(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> QueryError {
    QueryError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    let advance = |c: char, line: &mut usize, column: &mut usize| {
        if c == '\n' {
            *line += 1;
            *column = 1;
        } else {
            *column += 1;
        }
    };
    while let Some(&c) = chars.peek() {
        let (start_line, start_column) = (line, column);
        if c.is_whitespace() {
            chars.next();
            advance(c, &mut line, &mut column);
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                advance(c, &mut line, &mut column);
            }
            continue;
        }
        let tok = match c {
            '{' | '}' | '.' | ';' | ',' | '*' => {
                chars.next();
                advance(c, &mut line, &mut column);
                Tok::Punct(c)
            }
            '<' => {
                chars.next();
                advance(c, &mut line, &mut column);
                let mut iri = String::new();
                loop {
                    match chars.next() {
                        Some('>') => {
                            advance('>', &mut line, &mut column);
                            break;
                        }
                        Some(c) if c.is_whitespace() => {
                            return Err(syntax(line, column, "whitespace inside <...>"));
                        }
                        Some(c) => {
                            advance(c, &mut line, &mut column);
                            iri.push(c);
                        }
                        None => return Err(syntax(start_line, start_column, "unterminated <...>")),
                    }
                }
                Tok::FullIri(iri)
            }
            '?' | '$' => {
                chars.next();
                advance(c, &mut line, &mut column);
                let mut name = String::new();
                while let Some(&c) = chars.peek().filter(|c| c.is_alphanumeric() || **c == '_') {
                    chars.next();
                    advance(c, &mut line, &mut column);
                    name.push(c);
                }
                if name.is_empty() {
                    return Err(syntax(start_line, start_column, "empty variable name"));
                }
                Tok::Var(name)
            }
            c if is_name_char(c) || c == ':' => {
                let mut head = String::new();
                while let Some(&c) = chars.peek().filter(|c| is_name_char(**c)) {
                    chars.next();
                    advance(c, &mut line, &mut column);
                    head.push(c);
                }
                if chars.peek() == Some(&':') {
                    chars.next();
                    advance(':', &mut line, &mut column);
                    let mut local = String::new();
                    while let Some(&c) = chars.peek().filter(|c| is_name_char(**c)) {
                        chars.next();
                        advance(c, &mut line, &mut column);
                        local.push(c);
                    }
                    if local.is_empty() {
                        Tok::PrefixLabel(head)
                    } else {
                        Tok::Prefixed(head, local)
                    }
                } else {
                    Tok::Word(head)
                }
            }
            other => return Err(syntax(line, column, format!("unexpected character {other:?}"))),
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_column,
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    prefixes: BTreeMap<String, String>,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Spanned, QueryError> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| syntax(self.end.0, self.end.1, "unexpected end of query"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Spanned { tok: Tok::Word(w), .. }) if w.eq_ignore_ascii_case(word))
    }

    fn expect_keyword(&mut self, word: &str) -> Result<(), QueryError> {
        let tok = self.next()?;
        match &tok.tok {
            Tok::Word(w) if w.eq_ignore_ascii_case(word) => Ok(()),
            _ => Err(syntax(tok.line, tok.column, format!("expected {word}"))),
        }
    }

    fn expect_punct(&mut self, p: char) -> Result<(), QueryError> {
        let tok = self.next()?;
        if tok.tok == Tok::Punct(p) {
            Ok(())
        } else {
            Err(syntax(tok.line, tok.column, format!("expected '{p}'")))
        }
    }

    fn prefix_decl(&mut self) -> Result<(), QueryError> {
        self.expect_keyword("PREFIX")?;
        let label = self.next()?;
        let name = match label.tok {
            Tok::PrefixLabel(name) => name,
            _ => return Err(syntax(label.line, label.column, "expected a prefix label such as 'h:'")),
        };
        let base = self.next()?;
        let Tok::FullIri(base) = base.tok else {
            return Err(syntax(base.line, base.column, "expected <base-iri>"));
        };
        self.prefixes.insert(name, base);
        Ok(())
    }

    fn term(&mut self, predicate: bool) -> Result<QueryTerm, QueryError> {
        let tok = self.next()?;
        match tok.tok {
            Tok::Var(v) => Ok(QueryTerm::Variable(v)),
            Tok::FullIri(iri) => Ok(QueryTerm::Iri(iri)),
            Tok::Prefixed(prefix, local) => {
                let base = self.prefixes.get(&prefix).ok_or_else(|| QueryError::UnknownPrefix {
                    prefix: prefix.clone(),
                    line: tok.line,
                    column: tok.column,
                })?;
                Ok(QueryTerm::Iri(format!("{base}{local}")))
            }
            Tok::Word(w) if predicate && w == "a" => Ok(QueryTerm::A),
            _ => Err(syntax(tok.line, tok.column, "expected a variable or IRI")),
        }
    }

    fn patterns(&mut self) -> Result<Vec<TriplePattern>, QueryError> {
        let mut patterns = Vec::new();
        loop {
            if matches!(
                self.peek(),
                Some(Spanned {
                    tok: Tok::Punct('}'),
                    ..
                })
            ) {
                break;
            }
            let subject = self.term(false)?;
            loop {
                let predicate = self.term(true)?;
                loop {
                    let object = self.term(false)?;
                    patterns.push(TriplePattern {
                        subject: subject.clone(),
                        predicate: predicate.clone(),
                        object,
                    });
                    if !self.eat(',') {
                        break;
                    }
                }
                if !self.eat(';') {
                    break;
                }
                // A trailing ';' before '.' or '}' is allowed.
                if matches!(
                    self.peek(),
                    Some(Spanned {
                        tok: Tok::Punct('.' | '}'),
                        ..
                    })
                ) {
                    break;
                }
            }
            if !self.eat('.') {
                break;
            }
        }
        let close = self.next()?;
        if close.tok != Tok::Punct('}') {
            return Err(syntax(close.line, close.column, "expected '.', ';' or '}'"));
        }
        if patterns.is_empty() {
            return Err(syntax(close.line, close.column, "empty pattern list"));
        }
        Ok(patterns)
    }

    fn eat(&mut self, p: char) -> bool {
        if matches!(self.peek(), Some(t) if t.tok == Tok::Punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}

pub(super) fn parse(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let end = text
        .lines()
        .enumerate()
        .last()
        .map_or((1, 1), |(i, l)| (i + 1, l.chars().count() + 1));
    let mut p = Parser {
        tokens,
        pos: 0,
        end,
        prefixes: BTreeMap::new(),
    };
    while p.keyword("PREFIX") {
        p.prefix_decl()?;
    }
    p.expect_keyword("SELECT")?;
    if p.keyword("DISTINCT") {
        p.pos += 1;
    }
    let mut select_vars = Vec::new();
    let mut star = false;
    loop {
        match p.peek().map(|t| &t.tok) {
            Some(Tok::Var(v)) => {
                select_vars.push(v.clone());
                p.pos += 1;
            }
            Some(Tok::Punct('*')) if select_vars.is_empty() && !star => {
                star = true;
                p.pos += 1;
            }
            _ => break,
        }
    }
    if select_vars.is_empty() && !star {
        let tok = p.next()?;
        return Err(syntax(tok.line, tok.column, "expected at least one ?variable or '*'"));
    }
    p.expect_keyword("WHERE")?;
    p.expect_punct('{')?;
    let patterns = p.patterns()?;
    if let Some(extra) = p.peek() {
        return Err(syntax(extra.line, extra.column, "unexpected input after '}'"));
    }
    if star {
        for pattern in &patterns {
            for v in pattern.variables() {
                if !select_vars.iter().any(|s| s == v) {
                    select_vars.push(v.to_string());
                }
            }
        }
    }
    Query::new(p.prefixes, select_vars, patterns)
}
