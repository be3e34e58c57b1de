use super::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Zero,
    Pipe,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Lt,
    Gt,
    Bang,
    Question,
    Plus,
    Minus,
    Colon,
    Semi,
    Eq,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Zero => "`0`".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Pipe => "|",
            Tok::Dot => ".",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Bang => "!",
            Tok::Question => "?",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Eq => "=",
            _ => "",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            out.push(Token {
                tok: Tok::Ident(text),
                span: Span::new(start.0, start.1, j - i),
            });
            col += j - i;
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_alphanumeric() {
                j += 1;
            }
            let span = Span::new(line, col, j - i);
            if j - i != 1 || c != '0' {
                let text: String = chars[i..j].iter().collect();
                return Err(Diagnostic::error(format!("unexpected number `{text}`"), span));
            }
            out.push(Token {
                tok: Tok::Zero,
                span,
            });
            col += 1;
            i = j;
            continue;
        }
        let tok = match c {
            '|' => Tok::Pipe,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '!' => Tok::Bang,
            '?' => Tok::Question,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            ':' => Tok::Colon,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            other => {
                return Err(Diagnostic::error(
                    format!("unexpected character `{other}`"),
                    Span::new(line, col, 1),
                ))
            }
        };
        out.push(Token {
            tok,
            span: Span::new(line, col, 1),
        });
        i += 1;
        col += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col, 0),
    });
    Ok(out)
}
