use super::ast::Pos;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Char(u8),
    Str(Vec<u8>),
    Kw(Kw),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Int,
    String,
    Void,
    Struct,
    File,
    Fn,
    If,
    Else,
    While,
    Return,
    Null,
    Stdin,
    Stdout,
    Stderr,
    New,
}

impl Kw {
    fn from_ident(s: &str) -> Option<Kw> {
        Some(match s {
            "int" => Kw::Int,
            "string" => Kw::String,
            "void" => Kw::Void,
            "struct" => Kw::Struct,
            "FILE" => Kw::File,
            "fn" => Kw::Fn,
            "if" => Kw::If,
            "else" => Kw::Else,
            "while" => Kw::While,
            "return" => Kw::Return,
            "NULL" => Kw::Null,
            "stdin" => Kw::Stdin,
            "stdout" => Kw::Stdout,
            "stderr" => Kw::Stderr,
            "new" => Kw::New,
            _ => return None,
        })
    }

    pub fn text(self) -> &'static str {
        match self {
            Kw::Int => "int",
            Kw::String => "string",
            Kw::Void => "void",
            Kw::Struct => "struct",
            Kw::File => "FILE",
            Kw::Fn => "fn",
            Kw::If => "if",
            Kw::Else => "else",
            Kw::While => "while",
            Kw::Return => "return",
            Kw::Null => "NULL",
            Kw::Stdin => "stdin",
            Kw::Stdout => "stdout",
            Kw::Stderr => "stderr",
            Kw::New => "new",
        }
    }
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Char(_) => f.write_str("character literal"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Kw(k) => write!(f, "`{}`", k.text()),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const PUNCTS: &[&str] = &[
    "->", "==", "!=", "<=", ">=", "(", ")", "{", "}", ";", ",", ".", "=", "<", ">", "+", "-", "*",
    "/", "%", "!",
];

pub fn tokenize(src: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    macro_rules! bump {
        ($n:expr) => {{
            for _ in 0..$n {
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }
    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos { line, col };
        if c.is_ascii_whitespace() {
            bump!(1);
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                bump!(1);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                bump!(1);
            }
            let word = &src[start..i];
            let tok = match Kw::from_ident(word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word.to_string()),
            };
            out.push((tok, pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                bump!(1);
            }
            let n = src[start..i].parse::<i64>().map_err(|_| SyntaxError {
                pos,
                message: "integer literal out of range".into(),
            })?;
            out.push((Tok::Int(n), pos));
            continue;
        }
        if c == b'\'' {
            bump!(1);
            let (b, len) = read_char(bytes, i).ok_or_else(|| SyntaxError {
                pos,
                message: "malformed character literal".into(),
            })?;
            bump!(len);
            if bytes.get(i) != Some(&b'\'') {
                return Err(SyntaxError { pos, message: "unterminated character literal".into() });
            }
            bump!(1);
            out.push((Tok::Char(b), pos));
            continue;
        }
        if c == b'"' {
            bump!(1);
            let mut s = Vec::new();
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        return Err(SyntaxError { pos, message: "unterminated string literal".into() })
                    }
                    Some(b'"') => {
                        bump!(1);
                        break;
                    }
                    Some(_) => {
                        let (b, len) = read_char(bytes, i).ok_or_else(|| SyntaxError {
                            pos,
                            message: "bad escape in string literal".into(),
                        })?;
                        s.push(b);
                        bump!(len);
                    }
                }
            }
            out.push((Tok::Str(s), pos));
            continue;
        }
        if let Some(p) = PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            bump!(p.len());
            out.push((Tok::Punct(p), pos));
            continue;
        }
        return Err(SyntaxError { pos, message: format!("unexpected character `{}`", c as char) });
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

fn read_char(bytes: &[u8], i: usize) -> Option<(u8, usize)> {
    match *bytes.get(i)? {
        b'\\' => {
            let b = match *bytes.get(i + 1)? {
                b'n' => b'\n',
                b't' => b'\t',
                b'r' => b'\r',
                b'0' => 0,
                b'\\' => b'\\',
                b'\'' => b'\'',
                b'"' => b'"',
                _ => return None,
            };
            Some((b, 2))
        }
        b => Some((b, 1)),
    }
}

pub fn escape_bytes(bytes: &[u8], quote: u8) -> String {
    let mut s = String::new();
    for &b in bytes {
        match b {
            b'\n' => s.push_str("\\n"),
            b'\t' => s.push_str("\\t"),
            b'\r' => s.push_str("\\r"),
            0 => s.push_str("\\0"),
            b'\\' => s.push_str("\\\\"),
            _ if b == quote => {
                s.push('\\');
                s.push(b as char);
            }
            _ => s.push(b as char),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_arrow_before_minus() {
        let toks: Vec<_> = tokenize("p->f - 1").unwrap().into_iter().map(|t| t.0).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("p".into()),
                Tok::Punct("->"),
                Tok::Ident("f".into()),
                Tok::Punct("-"),
                Tok::Int(1),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn escapes_round_trip() {
        let toks = tokenize(r#""a\n\"b" '\n'"#).unwrap();
        assert_eq!(toks[0].0, Tok::Str(b"a\n\"b".to_vec()));
        assert_eq!(toks[1].0, Tok::Char(b'\n'));
        assert_eq!(escape_bytes(b"a\n\"b", b'"'), r#"a\n\"b"#);
    }

    #[test]
    fn reports_position_of_bad_char() {
        let err = tokenize("int x;\n  @").unwrap_err();
        assert_eq!(err.pos, Pos { line: 2, col: 3 });
    }
}
