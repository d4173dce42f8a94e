//! Unified diffs: a structured model, a strict parser and a canonical renderer.
//!
//! Only the parts of the format that carry the edit are modelled: file
//! headers, hunk headers and tagged body lines. Git extended headers
//! (`diff --git`, `index`, mode lines) are skipped, `\ No newline at end of
//! file` markers are dropped.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineTag {
    Context,
    Removed,
    Added,
}

impl LineTag {
    fn marker(self) -> char {
        match self {
            LineTag::Context => ' ',
            LineTag::Removed => '-',
            LineTag::Added => '+',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HunkLine {
    pub tag: LineTag,
    pub text: String,
}

impl HunkLine {
    pub fn new(tag: LineTag, text: impl Into<String>) -> Self {
        HunkLine { tag, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    pub lines: Vec<HunkLine>,
}

/// A changed line together with its position in the original and patched
/// file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChangedLine<'a> {
    pub tag: LineTag,
    pub text: &'a str,
    /// Line number in the original file for removed lines. For added lines,
    /// the original line the insertion is anchored to (the last original
    /// line consumed before it, or the hunk's old start).
    pub old_line: u32,
    /// Line number in the patched file for added lines. For removed lines,
    /// the patched-file position the removal collapses onto.
    pub new_line: u32,
}

impl Hunk {
    /// Builds a hunk from its body, deriving the header counts.
    pub fn from_lines(old_start: u32, new_start: u32, lines: Vec<HunkLine>) -> Self {
        let old_len = lines.iter().filter(|l| l.tag != LineTag::Added).count() as u32;
        let new_len = lines.iter().filter(|l| l.tag != LineTag::Removed).count() as u32;
        Hunk { old_start, old_len, new_start, new_len, lines }
    }

    /// Removed and added lines with their positions.
    pub fn changed_lines(&self) -> Vec<ChangedLine<'_>> {
        let mut old = self.old_start;
        let mut new = self.new_start;
        let mut last_old: Option<u32> = None;
        let mut out = Vec::new();
        for line in &self.lines {
            match line.tag {
                LineTag::Context => {
                    last_old = Some(old);
                    old += 1;
                    new += 1;
                }
                LineTag::Removed => {
                    out.push(ChangedLine { tag: LineTag::Removed, text: &line.text, old_line: old, new_line: new });
                    last_old = Some(old);
                    old += 1;
                }
                LineTag::Added => {
                    let anchor = last_old.unwrap_or(self.old_start);
                    out.push(ChangedLine { tag: LineTag::Added, text: &line.text, old_line: anchor, new_line: new });
                    new += 1;
                }
            }
        }
        out
    }

    // Half-open range of original lines the hunk covers; a pure insertion
    // `-n,0` sits between line n and n+1.
    fn old_range(&self) -> (u32, u32) {
        if self.old_len == 0 {
            (self.old_start + 1, self.old_start + 1)
        } else {
            (self.old_start, self.old_start + self.old_len)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FileEdit {
    pub path: String,
    pub hunks: Vec<Hunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("line {line}: malformed hunk header `{header}`")]
    MalformedHunkHeader { line: usize, header: String },
    #[error("line {line}: hunk header without a preceding `---`/`+++` file header")]
    HunkWithoutFile { line: usize },
    #[error("line {line}: `---` header not followed by a `+++` header")]
    MissingTargetHeader { line: usize },
    #[error(
        "line {line}: hunk body does not match its header (expected -{expected_old}/+{expected_new} lines, found -{found_old}/+{found_new})"
    )]
    BodyLengthMismatch { line: usize, expected_old: u32, expected_new: u32, found_old: u32, found_new: u32 },
    #[error("line {line}: hunk overlaps or precedes the previous hunk of the same file")]
    HunksOutOfOrder { line: usize },
}

impl DiffError {
    /// 1-based line of the diff text the error refers to.
    pub fn line(&self) -> usize {
        match *self {
            DiffError::MalformedHunkHeader { line, .. }
            | DiffError::HunkWithoutFile { line }
            | DiffError::MissingTargetHeader { line }
            | DiffError::BodyLengthMismatch { line, .. }
            | DiffError::HunksOutOfOrder { line } => line,
        }
    }
}

const DEV_NULL: &str = "/dev/null";

fn header_path(raw: &str) -> &str {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    raw.strip_prefix("a/").or_else(|| raw.strip_prefix("b/")).unwrap_or(raw)
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(header: &str) -> Option<(u32, u32, u32, u32)> {
    let rest = header.strip_prefix("@@ ")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(' ')?;
    let (old_start, old_len) = parse_range(old.strip_prefix('-')?)?;
    let (new_start, new_len) = parse_range(new.strip_prefix('+')?)?;
    Some((old_start, old_len, new_start, new_len))
}

// A `---`/`+++` pair directly followed by a hunk header ends a short body
// instead of being read as a removed and an added line.
fn starts_file(rest: &[&str]) -> bool {
    matches!(rest, [a, b, c, ..] if a.starts_with("--- ") && b.starts_with("+++ ") && c.starts_with("@@ "))
}

/// Parses unified-diff text into per-file edits.
///
/// Line numbers come from the hunk headers; hunk bodies are consumed by
/// count, so a body that disagrees with its header is an error rather than a
/// silently truncated hunk. Files whose headers carry no hunks are omitted.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileEdit>, DiffError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut edits: Vec<FileEdit> = Vec::new();
    let mut current: Option<FileEdit> = None;
    let mut i = 0;

    while i < lines.len() {
        let line_no = i + 1;
        let line = lines[i];
        if let Some(source) = line.strip_prefix("--- ") {
            let target = lines.get(i + 1).and_then(|l| l.strip_prefix("+++ ")).ok_or(DiffError::MissingTargetHeader { line: line_no })?;
            if let Some(done) = current.take() {
                if !done.hunks.is_empty() {
                    edits.push(done);
                }
            }
            let path = if header_path(target) == DEV_NULL { header_path(source) } else { header_path(target) };
            current = Some(FileEdit { path: path.to_string(), hunks: Vec::new() });
            i += 2;
            continue;
        }
        if line.starts_with("@@") {
            let (old_start, old_len, new_start, new_len) =
                parse_hunk_header(line).ok_or_else(|| DiffError::MalformedHunkHeader { line: line_no, header: line.to_string() })?;
            let file = current.as_mut().ok_or(DiffError::HunkWithoutFile { line: line_no })?;
            let mut body = Vec::new();
            let (mut seen_old, mut seen_new) = (0u32, 0u32);
            i += 1;
            while seen_old < old_len || seen_new < new_len {
                let Some(&raw) = lines.get(i) else { break };
                if starts_file(&lines[i..]) {
                    break;
                }
                let (tag, text) = match raw.chars().next() {
                    None => (LineTag::Context, ""),
                    Some(' ') => (LineTag::Context, &raw[1..]),
                    Some('-') => (LineTag::Removed, &raw[1..]),
                    Some('+') => (LineTag::Added, &raw[1..]),
                    Some('\\') => {
                        i += 1;
                        continue;
                    }
                    Some(_) => break,
                };
                match tag {
                    LineTag::Context => {
                        seen_old += 1;
                        seen_new += 1;
                    }
                    LineTag::Removed => seen_old += 1,
                    LineTag::Added => seen_new += 1,
                }
                if seen_old > old_len || seen_new > new_len {
                    break;
                }
                body.push(HunkLine::new(tag, text));
                i += 1;
            }
            // skip a trailing no-newline marker
            while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                i += 1;
            }
            let overrun = lines.get(i).is_some_and(|l| {
                (l.starts_with('+') && !l.starts_with("+++ ")) || (l.starts_with('-') && !l.starts_with("--- ")) || l.starts_with(' ')
            });
            if seen_old != old_len || seen_new != new_len || overrun {
                let (found_old, found_new) = if overrun {
                    let extra = &lines[i];
                    (seen_old + u32::from(!extra.starts_with('+')), seen_new + u32::from(!extra.starts_with('-')))
                } else {
                    (seen_old, seen_new)
                };
                return Err(DiffError::BodyLengthMismatch {
                    line: i.min(lines.len().saturating_sub(1)) + 1,
                    expected_old: old_len,
                    expected_new: new_len,
                    found_old,
                    found_new,
                });
            }
            let hunk = Hunk { old_start, old_len, new_start, new_len, lines: body };
            if let Some(prev) = file.hunks.last() {
                if prev.old_range().1 > hunk.old_range().0 {
                    return Err(DiffError::HunksOutOfOrder { line: line_no });
                }
            }
            file.hunks.push(hunk);
            continue;
        }
        // extended headers, `diff --git`, blank separators
        i += 1;
    }
    if let Some(done) = current.take() {
        if !done.hunks.is_empty() {
            edits.push(done);
        }
    }
    Ok(edits)
}

/// Renders edits in canonical unified-diff form: `a/`/`b/` file headers,
/// explicit counts in every hunk header, no extended headers.
pub fn render_unified_diff(edits: &[FileEdit]) -> String {
    let mut out = String::new();
    for edit in edits {
        let _ = writeln!(out, "--- a/{}", edit.path);
        let _ = writeln!(out, "+++ b/{}", edit.path);
        for hunk in &edit.hunks {
            let _ = writeln!(out, "@@ -{},{} +{},{} @@", hunk.old_start, hunk.old_len, hunk.new_start, hunk.new_len);
            for line in &hunk.lines {
                out.push(line.tag.marker());
                out.push_str(&line.text);
                out.push('\n');
            }
        }
    }
    out
}

/// Syntactic identity key used for deduplication: files in path order, hunk
/// headers verbatim, every body line whitespace-trimmed.
pub fn normalized_key(edits: &[FileEdit]) -> String {
    let mut sorted: Vec<&FileEdit> = edits.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    let mut out = String::new();
    for edit in sorted {
        let _ = writeln!(out, "F {}", edit.path);
        for hunk in &edit.hunks {
            let _ = writeln!(out, "H {} {} {} {}", hunk.old_start, hunk.old_len, hunk.new_start, hunk.new_len);
            for line in &hunk.lines {
                out.push(line.tag.marker());
                out.push_str(line.text.trim());
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const P1: &str = "--- a/src/Variance.java\n+++ b/src/Variance.java\n@@ -320 +320 @@\n-        if (length == 1) {\n+        if (length == 5 && length != 0) {\n";

    #[test]
    fn parses_single_replacement() {
        let edits = parse_unified_diff(P1).unwrap();
        assert_eq!(edits.len(), 1);
        assert_eq!(edits[0].path, "src/Variance.java");
        let hunk = &edits[0].hunks[0];
        assert_eq!((hunk.old_start, hunk.old_len, hunk.new_start, hunk.new_len), (320, 1, 320, 1));
        assert_eq!(hunk.lines[1], HunkLine::new(LineTag::Added, "        if (length == 5 && length != 0) {"));
    }

    #[test]
    fn empty_text_has_no_edits() {
        assert_eq!(parse_unified_diff("").unwrap(), vec![]);
    }

    #[test]
    fn skips_git_headers_and_no_newline_marker() {
        let text = "diff --git a/x.c b/x.c\nindex 1111111..2222222 100644\n--- a/x.c\n+++ b/x.c\n@@ -1,2 +1,2 @@\n keep\n-old\n\\ No newline at end of file\n+new\n\\ No newline at end of file\n";
        let edits = parse_unified_diff(text).unwrap();
        assert_eq!(edits[0].hunks[0].lines.len(), 3);
    }

    #[test]
    fn new_file_takes_source_path_when_target_is_dev_null() {
        let text = "--- a/gone.c\n+++ /dev/null\n@@ -1,1 +0,0 @@\n-bye\n";
        assert_eq!(parse_unified_diff(text).unwrap()[0].path, "gone.c");
    }

    #[test]
    fn malformed_header_reports_position() {
        let text = "--- a/x\n+++ b/x\n@@ -a,1 +1 @@\n-x\n+y\n";
        let err = parse_unified_diff(text).unwrap_err();
        assert!(matches!(err, DiffError::MalformedHunkHeader { line: 3, .. }));
    }

    #[test]
    fn short_body_is_rejected() {
        let text = "--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n-b\n+c\n";
        let err = parse_unified_diff(text).unwrap_err();
        assert!(matches!(err, DiffError::BodyLengthMismatch { expected_old: 3, found_old: 2, .. }), "{err:?}");
    }

    #[test]
    fn short_body_does_not_swallow_the_next_file() {
        let text = "--- a/x\n+++ b/x\n@@ -1,1 +1,2 @@\n+a\n--- a/y\n+++ b/y\n@@ -3,0 +4,1 @@\n+b\n";
        let err = parse_unified_diff(text).unwrap_err();
        assert!(matches!(err, DiffError::BodyLengthMismatch { line: 5, found_old: 0, found_new: 1, .. }), "{err:?}");
    }

    #[test]
    fn long_body_is_rejected() {
        let text = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-b\n+c\n+d\n";
        let err = parse_unified_diff(text).unwrap_err();
        assert_eq!(err.line(), 6);
    }

    #[test]
    fn hunk_without_file_header() {
        let err = parse_unified_diff("@@ -1 +1 @@\n-a\n+b\n").unwrap_err();
        assert_eq!(err, DiffError::HunkWithoutFile { line: 1 });
    }

    #[test]
    fn overlapping_hunks_are_rejected() {
        let text = "--- a/x\n+++ b/x\n@@ -5,2 +5,2 @@\n-a\n-b\n+c\n+d\n@@ -6 +6 @@\n-e\n+f\n";
        assert!(matches!(parse_unified_diff(text), Err(DiffError::HunksOutOfOrder { line: 8 })));
    }

    #[test]
    fn changed_line_positions() {
        let text = "--- a/x\n+++ b/x\n@@ -10,3 +10,4 @@\n ctx\n-gone\n+one\n+two\n ctx2\n";
        let edits = parse_unified_diff(text).unwrap();
        let changed = edits[0].hunks[0].changed_lines();
        let pos: Vec<_> = changed.iter().map(|c| (c.tag, c.old_line, c.new_line)).collect();
        assert_eq!(pos, vec![(LineTag::Removed, 11, 11), (LineTag::Added, 11, 11), (LineTag::Added, 11, 12)]);
    }

    #[test]
    fn render_is_canonical() {
        let edits = parse_unified_diff(P1).unwrap();
        let rendered = render_unified_diff(&edits);
        assert!(rendered.contains("@@ -320,1 +320,1 @@\n"));
        assert_eq!(parse_unified_diff(&rendered).unwrap(), edits);
    }

    #[test]
    fn normalized_key_ignores_surrounding_whitespace() {
        let a = parse_unified_diff(P1).unwrap();
        let b = parse_unified_diff(&P1.replace("!= 0) {\n", "!= 0) {   \n")).unwrap();
        assert_ne!(a, b);
        assert_eq!(normalized_key(&a), normalized_key(&b));
    }
}
