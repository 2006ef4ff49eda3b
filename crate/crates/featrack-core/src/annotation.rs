//! Directive scanning and pre-compilation filtering for annotated sources.
//!
//! A block opens with `//PVSCL:IFCOND(<expr>)` and closes with
//! `//PVSCL:ENDCOND`; both must be alone on their line (leading whitespace
//! allowed). Blocks nest, and a block's effective condition is the AND of
//! its own condition with all of its ancestors'. The comment prefix is
//! configurable for host languages that do not use `//`.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::expr::{parse_expr, ExprError, FeatureExpression};

const DIRECTIVE_MARKER: &str = "PVSCL:";
const OPEN_KEYWORD: &str = "IFCOND";
const CLOSE_KEYWORD: &str = "ENDCOND";

/// How directives are spelled in the host language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveSyntax {
    /// Comment prefix immediately preceding `PVSCL:`, e.g. `//` or `#`.
    pub comment_prefix: String,
}

impl Default for DirectiveSyntax {
    fn default() -> Self {
        Self { comment_prefix: "//".to_string() }
    }
}

impl DirectiveSyntax {
    pub fn with_prefix(prefix: impl Into<String>) -> Self {
        Self { comment_prefix: prefix.into() }
    }
}

/// One scanned `#ifdef` block. Line indexes are 0-based; the body spans
/// `open_line + 1 .. close_line`, exclusive of both directive lines.
#[derive(Debug, Clone, PartialEq)]
pub struct IfdefBlock {
    /// Line holding the opening directive.
    pub open_line: usize,
    /// Line holding the closing directive.
    pub close_line: usize,
    /// The condition written on the opening directive.
    pub condition: FeatureExpression,
    /// Index of the enclosing block within the scan result, if nested.
    pub parent: Option<usize>,
}

/// Errors from scanning directive structure. Lines are 1-based in messages.
#[derive(Debug, Error, PartialEq)]
pub enum ScanError {
    #[error("line {line}: unclosed {marker}{open} directive", marker = DIRECTIVE_MARKER, open = OPEN_KEYWORD)]
    DanglingOpen { line: usize },
    #[error("line {line}: {marker}{close} without a matching open directive", marker = DIRECTIVE_MARKER, close = CLOSE_KEYWORD)]
    StrayClose { line: usize },
    #[error("line {line}: malformed directive condition: {source}")]
    BadCondition {
        line: usize,
        #[source]
        source: ExprError,
    },
    #[error("line {line}: directive is missing its '(' argument list")]
    MissingArgument { line: usize },
    #[error("line {line}: directive argument list is never closed")]
    UnterminatedArgument { line: usize },
    #[error("line {line}: unexpected content after directive: '{rest}'")]
    TrailingContent { line: usize, rest: String },
    #[error("line {line}: unsupported directive '{directive}'")]
    UnsupportedDirective { line: usize, directive: String },
}

/// A scanned source file: its lines plus the blocks found in them.
#[derive(Debug, Clone)]
pub struct ScannedSource<'a> {
    lines: Vec<&'a str>,
    trailing_newline: bool,
    blocks: Vec<IfdefBlock>,
    /// For each line, the index of the innermost enclosing block, if any.
    enclosing: Vec<Option<usize>>,
    /// Lines holding directives (removed on preprocessing).
    directive_lines: Vec<bool>,
}

enum DirectiveLine {
    Open(FeatureExpression),
    Close,
    None,
}

fn classify_line(line: &str, lineno: usize, syntax: &DirectiveSyntax) -> Result<DirectiveLine, ScanError> {
    let trimmed = line.trim_start();
    let Some(after_prefix) = trimmed.strip_prefix(syntax.comment_prefix.as_str()) else {
        return Ok(DirectiveLine::None);
    };
    let Some(directive) = after_prefix.strip_prefix(DIRECTIVE_MARKER) else {
        return Ok(DirectiveLine::None);
    };
    let directive = directive.trim_end();
    if directive == CLOSE_KEYWORD {
        return Ok(DirectiveLine::Close);
    }
    if let Some(rest) = directive.strip_prefix(OPEN_KEYWORD) {
        let rest = rest.trim_start();
        if !rest.starts_with('(') {
            return Err(ScanError::MissingArgument { line: lineno });
        }
        // Take the balanced (...) span; condition expressions may nest parens.
        let mut depth = 0usize;
        let mut end = None;
        for (i, c) in rest.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(end) = end else {
            return Err(ScanError::UnterminatedArgument { line: lineno });
        };
        let tail = rest[end + 1..].trim();
        if !tail.is_empty() {
            return Err(ScanError::TrailingContent { line: lineno, rest: tail.to_string() });
        }
        let condition = parse_expr(&rest[1..end])
            .map_err(|source| ScanError::BadCondition { line: lineno, source })?;
        return Ok(DirectiveLine::Open(condition));
    }
    // ELSECOND and friends: fail loudly rather than mis-track.
    let name: String = directive.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
    Err(ScanError::UnsupportedDirective { line: lineno, directive: name })
}

/// Scans `source` into its directive blocks, returned in document order.
pub fn scan_blocks(source: &str, syntax: &DirectiveSyntax) -> Result<Vec<IfdefBlock>, ScanError> {
    Ok(ScannedSource::scan(source, syntax)?.blocks)
}

impl<'a> ScannedSource<'a> {
    /// Scans the full structure of `source`, keeping per-line bookkeeping
    /// so callers can filter or instrument it.
    pub fn scan(source: &'a str, syntax: &DirectiveSyntax) -> Result<Self, ScanError> {
        let trailing_newline = source.ends_with('\n');
        let mut lines: Vec<&str> = source.split('\n').collect();
        if trailing_newline {
            lines.pop();
        }

        let mut blocks: Vec<IfdefBlock> = Vec::new();
        let mut enclosing: Vec<Option<usize>> = Vec::with_capacity(lines.len());
        let mut directive_lines = vec![false; lines.len()];
        let mut stack: Vec<usize> = Vec::new();

        for (idx, line) in lines.iter().enumerate() {
            match classify_line(line, idx + 1, syntax)? {
                DirectiveLine::Open(condition) => {
                    directive_lines[idx] = true;
                    enclosing.push(stack.last().copied());
                    blocks.push(IfdefBlock {
                        open_line: idx,
                        close_line: idx, // patched on close
                        condition,
                        parent: stack.last().copied(),
                    });
                    stack.push(blocks.len() - 1);
                }
                DirectiveLine::Close => {
                    directive_lines[idx] = true;
                    let Some(open_idx) = stack.pop() else {
                        return Err(ScanError::StrayClose { line: idx + 1 });
                    };
                    blocks[open_idx].close_line = idx;
                    // The close line itself belongs to the block being closed.
                    enclosing.push(Some(open_idx));
                }
                DirectiveLine::None => {
                    enclosing.push(stack.last().copied());
                }
            }
        }
        if let Some(&open_idx) = stack.last() {
            return Err(ScanError::DanglingOpen { line: blocks[open_idx].open_line + 1 });
        }
        Ok(Self { lines, trailing_newline, blocks, enclosing, directive_lines })
    }

    pub fn blocks(&self) -> &[IfdefBlock] {
        &self.blocks
    }

    pub fn lines(&self) -> &[&'a str] {
        &self.lines
    }

    /// True when the given 0-based line holds a directive.
    pub fn is_directive_line(&self, line: usize) -> bool {
        self.directive_lines.get(line).copied().unwrap_or(false)
    }

    /// Innermost block enclosing the given line, if any. Directive lines
    /// report the block they open or close.
    pub fn innermost_block(&self, line: usize) -> Option<usize> {
        self.enclosing.get(line).copied().flatten()
    }

    /// Feature names mentioned by the block's effective condition, i.e. its
    /// own condition plus every ancestor's.
    pub fn effective_mentions(&self, block: usize) -> HashSet<String> {
        let mut out = HashSet::new();
        let mut cursor = Some(block);
        while let Some(idx) = cursor {
            let b = &self.blocks[idx];
            out.extend(b.condition.feature_names());
            cursor = b.parent;
        }
        out
    }

    /// The block's effective condition as one expression: ancestors first
    /// (outermost to innermost), conjoined with the block's own condition.
    pub fn effective_condition(&self, block: usize) -> FeatureExpression {
        let mut chain = Vec::new();
        let mut cursor = Some(block);
        while let Some(idx) = cursor {
            chain.push(self.blocks[idx].condition.clone());
            cursor = self.blocks[idx].parent;
        }
        chain.reverse();
        let mut iter = chain.into_iter();
        let first = iter.next().expect("chain contains at least the block itself");
        iter.fold(first, FeatureExpression::and)
    }

    /// True when the block's effective condition holds under `selection`.
    pub fn block_selected(&self, block: usize, selection: &HashMap<String, bool>) -> bool {
        let b = &self.blocks[block];
        b.condition.eval_selection(selection)
            && b.parent.map_or(true, |p| self.block_selected(p, selection))
    }

    /// Renders the source with directive lines removed and every block body
    /// kept only when its effective condition holds under `selection`.
    pub fn filter(&self, selection: &HashMap<String, bool>) -> String {
        // Parents precede children in document order, so one forward pass
        // resolves every effective condition.
        let mut included: Vec<bool> = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let own = b.condition.eval_selection(selection);
            included.push(own && b.parent.map_or(true, |p| included[p]));
        }

        let mut kept: Vec<&str> = Vec::with_capacity(self.lines.len());
        for (idx, line) in self.lines.iter().enumerate() {
            if self.directive_lines[idx] {
                continue;
            }
            match self.enclosing[idx] {
                Some(block) if !included[block] => continue,
                _ => kept.push(line),
            }
        }
        let mut out = kept.join("\n");
        if self.trailing_newline && !out.is_empty() {
            out.push('\n');
        }
        out
    }
}

/// Filters `source` against a configuration selection: directive lines are
/// removed and a block's body survives iff its effective condition holds.
pub fn preprocess(
    source: &str,
    selection: &HashMap<String, bool>,
    syntax: &DirectiveSyntax,
) -> Result<String, ScanError> {
    Ok(ScannedSource::scan(source, syntax)?.filter(selection))
}
