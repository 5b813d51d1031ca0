use super::parser::{ParseError, ParseErrorKind};
use super::Loc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident(String),
    Int(u64),
    Module,
    EndModule,
    Input,
    Output,
    Reg,
    Wire,
    Assign,
    Next,
    If,
    Else,
    Cover,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    DotDot,
    Assign1,
    EqEq,
    NotEq,
    Lt,
    Gt,
    Shl,
    Shr,
    Plus,
    Minus,
    Tilde,
    Bang,
    Pipe,
    Caret,
    Amp,
    Eof,
}

impl TokenKind {
    pub(crate) fn describe(&self) -> String {
        match self {
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Int(v) => format!("integer `{v}`"),
            TokenKind::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            TokenKind::Module => "module",
            TokenKind::EndModule => "endmodule",
            TokenKind::Input => "input",
            TokenKind::Output => "output",
            TokenKind::Reg => "reg",
            TokenKind::Wire => "wire",
            TokenKind::Assign => "assign",
            TokenKind::Next => "next",
            TokenKind::If => "if",
            TokenKind::Else => "else",
            TokenKind::Cover => "cover",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::Comma => ",",
            TokenKind::Semi => ";",
            TokenKind::Colon => ":",
            TokenKind::DotDot => "..",
            TokenKind::Assign1 => "=",
            TokenKind::EqEq => "==",
            TokenKind::NotEq => "!=",
            TokenKind::Lt => "<",
            TokenKind::Gt => ">",
            TokenKind::Shl => "<<",
            TokenKind::Shr => ">>",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Tilde => "~",
            TokenKind::Bang => "!",
            TokenKind::Pipe => "|",
            TokenKind::Caret => "^",
            TokenKind::Amp => "&",
            TokenKind::Ident(_) | TokenKind::Int(_) | TokenKind::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub loc: Loc,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "module" => TokenKind::Module,
        "endmodule" => TokenKind::EndModule,
        "input" => TokenKind::Input,
        "output" => TokenKind::Output,
        "reg" => TokenKind::Reg,
        "wire" => TokenKind::Wire,
        "assign" => TokenKind::Assign,
        "next" => TokenKind::Next,
        "if" => TokenKind::If,
        "else" => TokenKind::Else,
        "cover" => TokenKind::Cover,
        _ => return None,
    })
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat(&mut self, expected: char) -> bool {
        if self.peek() == Some(expected) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn loc(&self) -> Loc {
        Loc::new(self.line, self.column)
    }
}

fn lex_error(loc: Loc, message: impl Into<String>) -> ParseError {
    ParseError {
        line: loc.line,
        column: loc.column,
        kind: ParseErrorKind::Lex,
        message: message.into(),
    }
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    loop {
        while cur.peek().is_some_and(char::is_whitespace) {
            cur.bump();
        }
        let loc = cur.loc();
        let Some(c) = cur.bump() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                loc,
            });
            return Ok(tokens);
        };
        let kind = match c {
            '/' if cur.eat('/') => {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
                continue;
            }
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '[' => TokenKind::LBracket,
            ']' => TokenKind::RBracket,
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            ',' => TokenKind::Comma,
            ';' => TokenKind::Semi,
            ':' => TokenKind::Colon,
            '+' => TokenKind::Plus,
            '-' => TokenKind::Minus,
            '~' => TokenKind::Tilde,
            '|' => TokenKind::Pipe,
            '^' => TokenKind::Caret,
            '&' => TokenKind::Amp,
            '.' if cur.eat('.') => TokenKind::DotDot,
            '=' if cur.eat('=') => TokenKind::EqEq,
            '=' => TokenKind::Assign1,
            '!' if cur.eat('=') => TokenKind::NotEq,
            '!' => TokenKind::Bang,
            '<' if cur.eat('<') => TokenKind::Shl,
            '<' => TokenKind::Lt,
            '>' if cur.eat('>') => TokenKind::Shr,
            '>' => TokenKind::Gt,
            c if c.is_ascii_digit() => lex_int(&mut cur, c, loc)?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::from(c);
                while let Some(c) = cur
                    .peek()
                    .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
                {
                    word.push(c);
                    cur.bump();
                }
                keyword(&word).unwrap_or(TokenKind::Ident(word))
            }
            other => return Err(lex_error(loc, format!("unexpected character {other:?}"))),
        };
        tokens.push(Token { kind, loc });
    }
}

fn lex_int(cur: &mut Cursor<'_>, first: char, loc: Loc) -> Result<TokenKind, ParseError> {
    let (radix, mut digits) = if first == '0' && matches!(cur.peek(), Some('x' | 'X')) {
        cur.bump();
        (16, String::new())
    } else {
        (10, String::from(first))
    };
    while let Some(c) = cur
        .peek()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
    {
        digits.push(c);
        cur.bump();
    }
    if digits.is_empty() {
        return Err(lex_error(loc, "hex literal has no digits"));
    }
    u64::from_str_radix(&digits, radix)
        .map(TokenKind::Int)
        .map_err(|_| lex_error(loc, format!("invalid integer literal `{digits}`")))
}
