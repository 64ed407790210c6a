//! Lightweight lexical scan for top-level C function definitions. Not a
//! parser: it only needs to find `name(...) { body }` shapes reliably enough
//! to tell whether a function body survived decompilation.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    /// Body with comments and literals blanked out, braces excluded.
    pub body: String,
}

impl FunctionDef {
    /// A body is trivial when it is empty or a single `return` of nothing
    /// or of a constant (casts allowed), the shape left behind when the
    /// real code was inlined elsewhere.
    pub fn is_trivial(&self) -> bool {
        let stmt = self.body.trim();
        if stmt.is_empty() {
            return true;
        }
        let Some(single) = stmt.strip_suffix(';').map(str::trim) else {
            return false;
        };
        if single.contains(';') || single.contains('{') {
            return false;
        }
        let Some(expr) = single.strip_prefix("return") else {
            return false;
        };
        if expr.starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_') {
            return false;
        }
        identifiers(expr).all(is_type_word)
    }
}

/// Identifiers in `expr`, skipping the tails of numeric literals (`0x1f`,
/// `10UL`).
fn identifiers(expr: &str) -> impl Iterator<Item = &str> {
    let bytes = expr.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(&expr[start..i]);
        } else {
            i += 1;
        }
    }
    out.into_iter()
}

fn is_type_word(word: &str) -> bool {
    matches!(
        word,
        "void" | "char" | "short" | "int" | "long" | "float" | "double" | "signed" | "unsigned" | "const"
            | "bool" | "_Bool" | "NULL" | "true" | "false" | "byte" | "uint" | "ulong" | "ushort" | "uchar"
    ) || word.starts_with("undefined")
        || (word.ends_with("_t") && (word.starts_with("int") || word.starts_with("uint") || word == "size_t"))
}

/// Replaces comments, string/char literals and preprocessor lines with
/// spaces, preserving byte offsets and newlines.
pub fn blank_noise(code: &str) -> String {
    #[derive(PartialEq)]
    enum S {
        Code,
        Line,
        Block,
        Str,
        Chr,
        Pre,
    }
    let bytes = code.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut state = S::Code;
    let mut at_line_start = true;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let next = bytes.get(i + 1).copied();
        match state {
            S::Code => {
                if c == b'/' && next == Some(b'/') {
                    state = S::Line;
                    out.extend_from_slice(b"  ");
                    i += 2;
                    continue;
                }
                if c == b'/' && next == Some(b'*') {
                    state = S::Block;
                    out.extend_from_slice(b"  ");
                    i += 2;
                    continue;
                }
                if c == b'#' && at_line_start {
                    state = S::Pre;
                    out.push(b' ');
                } else if c == b'"' {
                    state = S::Str;
                    out.push(b'"');
                } else if c == b'\'' {
                    state = S::Chr;
                    out.push(b'\'');
                } else {
                    out.push(c);
                }
            }
            S::Line | S::Pre => {
                if c == b'\\' && next == Some(b'\n') {
                    out.extend_from_slice(b" \n");
                    i += 2;
                    continue;
                }
                if c == b'\n' {
                    state = S::Code;
                    out.push(b'\n');
                } else {
                    out.push(b' ');
                }
            }
            S::Block => {
                if c == b'*' && next == Some(b'/') {
                    state = S::Code;
                    out.extend_from_slice(b"  ");
                    i += 2;
                    continue;
                }
                out.push(if c == b'\n' { b'\n' } else { b' ' });
            }
            S::Str | S::Chr => {
                let close = if state == S::Str { b'"' } else { b'\'' };
                if c == b'\\' && next.is_some() {
                    out.extend_from_slice(b"  ");
                    i += 2;
                    continue;
                }
                if c == close || c == b'\n' {
                    state = S::Code;
                    out.push(c);
                } else {
                    out.push(b' ');
                }
            }
        }
        if c == b'\n' {
            at_line_start = true;
        } else if !c.is_ascii_whitespace() {
            at_line_start = false;
        }
        i += 1;
    }
    // only ASCII bytes were substituted; multi-byte sequences inside code
    // are copied through intact, so this cannot fail
    String::from_utf8(out).unwrap_or_default()
}

const KNR_MAX_DECLS: usize = 16;

/// Finds top-level function definitions.
pub fn function_definitions(code: &str) -> Vec<FunctionDef> {
    let clean = blank_noise(code);
    let b = clean.as_bytes();
    let mut defs = Vec::new();
    let mut depth = 0usize;
    // starts of the top-level declarations since the last definition; K&R
    // parameter declarations put several of them before one body
    let mut starts = vec![0usize];
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'{' if depth == 0 => {
                let close = find_matching_brace(b, i);
                let found = starts
                    .iter()
                    .rev()
                    .take(KNR_MAX_DECLS)
                    .find_map(|&start| definition_name(&clean[start..i]));
                if let Some(name) = found {
                    defs.push(FunctionDef {
                        name,
                        body: clean[i + 1..close.min(b.len())].to_owned(),
                    });
                }
                i = close + 1;
                starts.clear();
                starts.push(i);
                continue;
            }
            b';' if depth == 0 => starts.push(i + 1),
            b'{' => depth += 1,
            b'}' => depth = depth.saturating_sub(1),
            _ => {}
        }
        i += 1;
    }
    defs
}

fn find_matching_brace(b: &[u8], open: usize) -> usize {
    let mut depth = 0usize;
    for (j, &c) in b.iter().enumerate().skip(open) {
        match c {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return j;
                }
            }
            _ => {}
        }
    }
    b.len()
}

/// Name of the function declared by `header` (text between the previous
/// top-level terminator and `{`), if it is a function header.
fn definition_name(header: &str) -> Option<String> {
    let trimmed = header.trim_end();
    let close = trimmed.rfind(')')?;
    // K&R parameter declarations end in `;` between `)` and `{`; anything
    // else after the parameter list other than attributes is not a function.
    let tail = trimmed[close + 1..].trim();
    if !tail.is_empty() && !tail.ends_with(';') && !tail.starts_with("__attribute__") {
        return None;
    }
    let before_params = &trimmed[..close];
    let mut depth = 1i32;
    let mut open = None;
    for (j, c) in before_params.char_indices().rev() {
        match c {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    open = Some(j);
                    break;
                }
            }
            _ => {}
        }
    }
    let prefix = trimmed[..open?].trim_end();
    if prefix.contains('=') {
        return None;
    }
    let name: String = prefix
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if name.is_empty() || name.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return None;
    }
    if matches!(name.as_str(), "if" | "while" | "for" | "switch" | "return" | "sizeof") {
        return None;
    }
    Some(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(code: &str) -> Vec<String> {
        function_definitions(code).into_iter().map(|d| d.name).collect()
    }

    #[test]
    fn finds_simple_definitions() {
        let code = "#include <stdio.h>\nint add(int a, int b) { return a + b; }\nint main(void) {\n  printf(\"%d\", add(1, 2));\n}\n";
        assert_eq!(names(code), ["add", "main"]);
    }

    #[test]
    fn skips_structs_and_initializers() {
        let code = "struct p { int x; };\nint tbl[] = { 1, 2 };\nstatic void (*fp)(void) = 0;\nvoid f(void) { }\n";
        assert_eq!(names(code), ["f"]);
    }

    #[test]
    fn braces_in_strings_and_comments_are_ignored() {
        let code = "/* { */ int f(void) { puts(\"}{\"); return '}'; } // {\nint g() { return 1; }";
        assert_eq!(names(code), ["f", "g"]);
    }

    #[test]
    fn ghidra_style_headers() {
        let code = "undefined8 FUN_00101139(long param_1,int param_2)\n\n{\n  return 0;\n}\n";
        let defs = function_definitions(code);
        assert_eq!(defs[0].name, "FUN_00101139");
        assert!(defs[0].is_trivial());
    }

    #[test]
    fn knr_parameters() {
        let code = "int f(a, b)\n  int a;\n  int b;\n{\n  return a + b;\n}\n";
        assert_eq!(names(code), ["f"]);
    }

    #[test]
    fn triviality() {
        let t = |body: &str| FunctionDef {
            name: "f".into(),
            body: body.into(),
        }
        .is_trivial();
        assert!(t(""));
        assert!(t("  return 0; "));
        assert!(t("return;"));
        assert!(t("return (undefined8)0x0;"));
        assert!(t("return -1;"));
        assert!(t("return(NULL);"));
        assert!(!t("return x + 1;"));
        assert!(!t("return f(2);"));
        assert!(!t("returnx;"));
        assert!(!t("x = 1; return x;"));
        assert!(!t("if (a) { return 1; }"));
    }
}
