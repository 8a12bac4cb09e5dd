//! Concrete text syntax for programs.
//!
//! ```text
//! prog  := stmt (';' stmt)*
//! stmt  := 'skip' | 'call' call | 'let' ident '=' call
//!        | 'if' '(' exp ')' 'then' block ('else' block)?
//!        | 'while' '(' exp ')' 'do' block
//!        | 'try' block ('catch' '(' ident ':' ident ')' block)*
//! block := '{' prog? '}'
//! exp   := 'let' ident '=' call ':' exp | call | sexp
//! call  := recv '.' ident '(' (sexp (',' sexp)*)? ')'
//! sexp  := ident | '$' ident | string | int | 'true' | 'false'
//! ```
//!
//! Whitespace and newlines are insignificant. A missing `else` and an empty
//! block both mean `skip`. The receiver of a `new` call is a type name.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Int(i) => write!(f, "integer {i}"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const KEYWORDS: &[&str] =
    &["skip", "call", "let", "if", "then", "else", "while", "do", "try", "catch", "true", "false"];

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| SyntaxError { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[start..j].iter().collect();
            if word == "$" {
                return Err(err(tl, tc, "`$` must be followed by a type name".into()));
            }
            advance(j - i, &mut i);
            out.push(Spanned { tok: Tok::Ident(word), line: tl, col: tc });
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let lit: String = chars[i..j].iter().collect();
            let value = lit.parse::<i64>().map_err(|_| err(tl, tc, format!("integer literal {lit} out of range")))?;
            advance(j - i, &mut i);
            out.push(Spanned { tok: Tok::Int(value), line: tl, col: tc });
        } else if c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None => return Err(err(tl, tc, "unterminated string literal".into())),
                    Some('"') => break,
                    Some('\\') => {
                        match chars.get(j + 1) {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(&e @ ('"' | '\\')) => s.push(e),
                            _ => return Err(err(tl, tc, "bad escape in string literal".into())),
                        }
                        j += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        j += 1;
                    }
                }
            }
            advance(j + 1 - i, &mut i);
            out.push(Spanned { tok: Tok::Str(s), line: tl, col: tc });
        } else if ";,.(){}=:".contains(c) {
            advance(1, &mut i);
            out.push(Spanned { tok: Tok::Punct(c), line: tl, col: tc });
        } else {
            return Err(err(tl, tc, format!("unexpected character {c:?}")));
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        let t = &self.toks[self.pos];
        Err(SyntaxError { line: t.line, col: t.col, message: message.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, c: char) -> bool {
        matches!(self.peek(), Tok::Punct(p) if *p == c)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SyntaxError> {
        if self.is_punct(c) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{c}`, found {}", self.peek()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            t => self.error(format!("expected identifier, found {t}")),
        }
    }

    fn binder(&mut self) -> Result<String, SyntaxError> {
        let name = self.ident()?;
        if name.starts_with('$') {
            return self.error(format!("cannot bind environment input {name}"));
        }
        Ok(name)
    }

    fn program(&mut self) -> Result<Program, SyntaxError> {
        let mut stmts = vec![self.stmt()?];
        while self.is_punct(';') {
            self.bump();
            stmts.push(self.stmt()?);
        }
        Ok(Program { stmts })
    }

    fn block(&mut self) -> Result<Program, SyntaxError> {
        self.expect_punct('{')?;
        if self.is_punct('}') {
            self.bump();
            return Ok(Program::skip());
        }
        let p = self.program()?;
        self.expect_punct('}')?;
        Ok(p)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let kw = match self.peek() {
            Tok::Ident(w) => w.clone(),
            t => return self.error(format!("expected statement, found {t}")),
        };
        match kw.as_str() {
            "skip" => {
                self.bump();
                Ok(Stmt::Skip)
            }
            "call" => {
                self.bump();
                Ok(Stmt::Call(self.call()?))
            }
            "let" => {
                self.bump();
                let x = self.binder()?;
                self.expect_punct('=')?;
                Ok(Stmt::Let(x, self.call()?))
            }
            "if" => {
                self.bump();
                self.expect_punct('(')?;
                let e = self.exp()?;
                self.expect_punct(')')?;
                self.expect_keyword("then")?;
                let a = self.block()?;
                let b = if self.is_keyword("else") {
                    self.bump();
                    self.block()?
                } else {
                    Program::skip()
                };
                Ok(Stmt::If(e, a, b))
            }
            "while" => {
                self.bump();
                self.expect_punct('(')?;
                let e = self.exp()?;
                self.expect_punct(')')?;
                self.expect_keyword("do")?;
                Ok(Stmt::While(e, self.block()?))
            }
            "try" => {
                self.bump();
                let body = self.block()?;
                let mut catches = Vec::new();
                while self.is_keyword("catch") {
                    self.bump();
                    self.expect_punct('(')?;
                    let var = self.binder()?;
                    self.expect_punct(':')?;
                    let ty = TypeName::new(self.ident()?);
                    self.expect_punct(')')?;
                    catches.push(Catch { var, ty, body: self.block()? });
                }
                Ok(Stmt::Try(body, catches))
            }
            _ => self.error(format!("expected statement, found `{kw}`")),
        }
    }

    fn exp(&mut self) -> Result<Exp, SyntaxError> {
        if self.is_keyword("let") {
            self.bump();
            let x = self.binder()?;
            self.expect_punct('=')?;
            let c = self.call()?;
            self.expect_punct(':')?;
            return Ok(Exp::Let(x, c, Box::new(self.exp()?)));
        }
        if matches!(self.peek_at(1), Tok::Punct('.')) {
            Ok(Exp::Call(self.call()?))
        } else {
            Ok(Exp::Sexp(self.sexp()?))
        }
    }

    fn sexp(&mut self) -> Result<Sexp, SyntaxError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(Sexp::Str(s))
            }
            Tok::Int(i) => {
                self.bump();
                Ok(Sexp::Int(i))
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Sexp::Bool(w == "true"))
            }
            _ => Ok(Sexp::Var(self.ident()?)),
        }
    }

    fn call(&mut self) -> Result<Call, SyntaxError> {
        let recv = self.sexp()?;
        self.expect_punct('.')?;
        let method = self.ident()?;
        let receiver = if method == "new" {
            match recv {
                Sexp::Var(t) if !t.starts_with('$') => Receiver::Type(TypeName::new(t)),
                _ => return self.error("constructor receiver must be a type name"),
            }
        } else {
            Receiver::Expr(recv)
        };
        self.expect_punct('(')?;
        let mut args = Vec::new();
        if !self.is_punct(')') {
            args.push(self.sexp()?);
            while self.is_punct(',') {
                self.bump();
                args.push(self.sexp()?);
            }
        }
        self.expect_punct(')')?;
        Ok(Call { receiver, method, args })
    }
}

/// Parses program text.
pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let prog = p.program()?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.error(format!("expected `;` or end of input, found {}", p.peek()));
    }
    Ok(prog)
}

/// Canonical single-line rendering; `format!("{:#}", p)` gives an indented
/// multi-line rendering. Both parse back to the same AST.
pub fn print_program(p: &Program) -> String {
    p.to_string()
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Var(v) => f.write_str(v),
            Sexp::Str(s) => {
                f.write_char('"')?;
                for ch in s.chars() {
                    match ch {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_char('"')
            }
            Sexp::Int(i) => write!(f, "{i}"),
            Sexp::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Receiver::Type(t) => write!(f, "{t}"),
            Receiver::Expr(e) => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.receiver, self.method)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_char(')')
    }
}

impl fmt::Display for Exp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exp::Sexp(s) => write!(f, "{s}"),
            Exp::Call(c) => write!(f, "{c}"),
            Exp::Let(x, c, e) => write!(f, "let {x} = {c}: {e}"),
        }
    }
}

struct Printer<'a, 'b> {
    f: &'a mut fmt::Formatter<'b>,
    pretty: bool,
}

impl Printer<'_, '_> {
    fn newline(&mut self, depth: usize) -> fmt::Result {
        if self.pretty {
            self.f.write_char('\n')?;
            for _ in 0..depth {
                self.f.write_str("  ")?;
            }
            Ok(())
        } else {
            self.f.write_char(' ')
        }
    }

    fn stmts(&mut self, p: &Program, depth: usize) -> fmt::Result {
        for (i, s) in p.stmts.iter().enumerate() {
            if i > 0 {
                self.f.write_char(';')?;
                self.newline(depth)?;
            }
            self.stmt(s, depth)?;
        }
        Ok(())
    }

    fn block(&mut self, p: &Program, depth: usize) -> fmt::Result {
        self.f.write_char('{')?;
        self.newline(depth + 1)?;
        self.stmts(p, depth + 1)?;
        self.newline(depth)?;
        self.f.write_char('}')
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) -> fmt::Result {
        match s {
            Stmt::Skip => self.f.write_str("skip"),
            Stmt::Call(c) => write!(self.f, "call {c}"),
            Stmt::Let(x, c) => write!(self.f, "let {x} = {c}"),
            Stmt::If(e, a, b) => {
                write!(self.f, "if ({e}) then ")?;
                self.block(a, depth)?;
                self.f.write_str(" else ")?;
                self.block(b, depth)
            }
            Stmt::While(e, b) => {
                write!(self.f, "while ({e}) do ")?;
                self.block(b, depth)
            }
            Stmt::Try(b, cs) => {
                self.f.write_str("try ")?;
                self.block(b, depth)?;
                for c in cs {
                    write!(self.f, " catch ({}: {}) ", c.var, c.ty)?;
                    self.block(&c.body, depth)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pretty = f.alternate();
        Printer { f, pretty }.stmt(self, 0)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pretty = f.alternate();
        Printer { f, pretty }.stmts(self, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skip_round_trips() {
        assert_eq!(parse_program("skip").unwrap(), Program::skip());
        assert_eq!(print_program(&Program::skip()), "skip");
    }

    #[test]
    fn seq_prints_with_semicolon() {
        let p = Program::skip().seq(Program::skip());
        assert_eq!(print_program(&p), "skip; skip");
        assert_eq!(parse_program("skip ;skip").unwrap(), p);
    }

    #[test]
    fn truncated_let_is_an_error() {
        let e = parse_program("let x = ").unwrap_err();
        assert_eq!((e.line, e.col), (1, 9));
    }

    #[test]
    fn reads_a_try_with_two_catches() {
        let text = "try {
              let fr = FileReader.new($String);
              let br = BufferedReader.new(fr);
              while (let s = br.readLine(): s) do { };
              call br.close()
            } catch (e1: FileNotFoundException) { } catch (e2: IOException) { }";
        let p = parse_program(text).unwrap();
        let Stmt::Try(body, catches) = &p.stmts[0] else { panic!("expected try") };
        assert_eq!(catches.len(), 2);
        assert!(matches!(body.stmts[2], Stmt::While(..)));
        assert_eq!(parse_program(&format!("{p:#}")).unwrap(), p);
        assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }

    #[test]
    fn missing_else_is_skip() {
        let p = parse_program("if (x) then { skip }").unwrap();
        assert_eq!(print_program(&p), "if (x) then { skip } else { skip }");
    }

    #[test]
    fn literals_and_escapes() {
        let p = parse_program(r#"call $Sys.print("a \"q\"\n", -3, true)"#).unwrap();
        assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_bad_constructor_receiver() {
        assert!(parse_program("call $File.new()").is_err());
        assert!(parse_program("let $x = a.b()").is_err());
        assert!(parse_program("skip skip").is_err());
        assert!(parse_program("call a.b(").is_err());
    }
}
