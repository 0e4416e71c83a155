//! Tokenizer shared by the surface parser and the operator-code parser.

use crate::ast::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Unsigned magnitude; sign handling happens in the parser.
    Int(u64),
    Float(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Float(v) => format!("number `{v:?}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

// Longest first.
const PUNCTS: &[&str] = &[
    "&&", "||", "==", "!=", "<=", ">=", "++", "--", "+=", "-=", "*=", "/=", "(", ")", "{", "}",
    "[", "]", ",", ";", ".", "=", "<", ">", "+", "-", "*", "/", "%", "!", "@", "&", ":",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = Span::new(line, col, 2);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(LexError { message: "unterminated block comment".into(), span: start });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let (sl, sc, si) = (line, col, i);
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let s: String = chars[si..i].iter().collect();
            out.push(Token { tok: Tok::Ident(s), span: Span::new(sl, sc, (i - si) as u32) });
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let mut is_float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_float = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let text: String = chars[si..i].iter().collect();
            let span = Span::new(sl, sc, (i - si) as u32);
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| LexError { message: format!("bad number `{text}`"), span })?)
            } else {
                Tok::Int(text.parse().map_err(|_| LexError {
                    message: format!("integer literal `{text}` out of range"),
                    span,
                })?)
            };
            out.push(Token { tok, span });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() || chars[i] == '\n' {
                    return Err(LexError {
                        message: "unterminated string literal".into(),
                        span: Span::new(sl, sc, (i - si) as u32),
                    });
                }
                let ch = chars[i];
                if ch == '"' {
                    bump!();
                    break;
                }
                if ch == '\\' {
                    bump!();
                    let esc = chars.get(i).copied().unwrap_or('\\');
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '0' => '\0',
                        other => other,
                    });
                    if i < chars.len() {
                        bump!();
                    }
                    continue;
                }
                s.push(ch);
                bump!();
            }
            out.push(Token { tok: Tok::Str(s), span: Span::new(sl, sc, (i - si) as u32) });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    bump!();
                }
                out.push(Token { tok: Tok::Punct(p), span: Span::new(sl, sc, p.len() as u32) });
            }
            None => {
                return Err(LexError {
                    message: format!("unexpected character `{c}`"),
                    span: Span::new(sl, sc, 1),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col, 0) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_field_access() {
        assert_eq!(
            toks("5.x 1.5 2e3"),
            vec![
                Tok::Int(5),
                Tok::Punct("."),
                Tok::Ident("x".into()),
                Tok::Float(1.5),
                Tok::Float(2000.0),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("// hi\n  a /* x\n */ b").unwrap();
        assert_eq!(t[0].span, Span::new(2, 3, 1));
        assert_eq!(t[1].span, Span::new(3, 5, 1));
    }

    #[test]
    fn unterminated_string_is_an_error() {
        let e = tokenize("x = \"abc").unwrap_err();
        assert_eq!(e.span.line, 1);
        assert_eq!(e.span.column, 5);
    }

    #[test]
    fn longest_punct_wins() {
        assert_eq!(toks("a--"), vec![Tok::Ident("a".into()), Tok::Punct("--"), Tok::Eof]);
        assert_eq!(toks("- -"), vec![Tok::Punct("-"), Tok::Punct("-"), Tok::Eof]);
    }
}
