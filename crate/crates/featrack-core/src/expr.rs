//! Feature expressions: the AND/OR predicate language shared by
//! pre-compilation directives and feedback-model target/context clauses.
//!
//! Grammar (AND binds tighter than OR, both left-associative):
//!
//! ```text
//! expr := term (OR term)*
//! term := atom (AND atom)*
//! atom := IDENT | '(' expr ')'
//! ```
//!
//! `IDENT` is `[A-Za-z_][A-Za-z0-9_]*` and is case-sensitive. There is no
//! negation: `NOT` (and `XOR`) are rejected at parse time instead of being
//! read as feature names.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// A feature-based predicate over AND/OR. Leaves are feature names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FeatureExpression {
    /// A bare feature name.
    Feature(String),
    /// Conjunction of exactly two sub-expressions.
    And(Box<FeatureExpression>, Box<FeatureExpression>),
    /// Disjunction of exactly two sub-expressions.
    Or(Box<FeatureExpression>, Box<FeatureExpression>),
}

/// Errors raised while parsing an expression. Positions are 1-based
/// character offsets into the input text.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unsupported operator '{op}' at position {pos}: only AND and OR are available")]
    UnsupportedOperator { op: String, pos: usize },
    #[error("expected a feature name or '(' at position {pos}, found {found}")]
    ExpectedAtom { found: String, pos: usize },
    #[error("unbalanced parenthesis: '(' opened at position {pos} is never closed")]
    UnclosedParen { pos: usize },
    #[error("unbalanced parenthesis: stray ')' at position {pos}")]
    StrayParen { pos: usize },
    #[error("trailing input at position {pos}: {found}")]
    TrailingInput { found: String, pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    And,
    Or,
    LParen,
    RParen,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    len: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self { chars: text.char_indices().peekable(), len: text.chars().count() }
    }

    /// Returns (token, 1-based position of its first character).
    fn next_token(&mut self) -> Result<Option<(Token, usize)>, ExprError> {
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_whitespace() {
                self.chars.next();
            } else {
                break;
            }
        }
        let Some(&(idx, c)) = self.chars.peek() else {
            return Ok(None);
        };
        let pos = idx + 1;
        match c {
            '(' => {
                self.chars.next();
                Ok(Some((Token::LParen, pos)))
            }
            ')' => {
                self.chars.next();
                Ok(Some((Token::RParen, pos)))
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&(_, c)) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        self.chars.next();
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "AND" => Token::And,
                    "OR" => Token::Or,
                    "NOT" | "XOR" => {
                        return Err(ExprError::UnsupportedOperator { op: word, pos })
                    }
                    _ => Token::Ident(word),
                };
                Ok(Some((tok, pos)))
            }
            other => Err(ExprError::UnexpectedChar { ch: other, pos }),
        }
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    end_pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Token, usize)> {
        self.tokens.get(self.cursor)
    }

    fn bump(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.cursor).cloned();
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    // expr := term (OR term)*
    fn expr(&mut self) -> Result<FeatureExpression, ExprError> {
        let mut lhs = self.term()?;
        while matches!(self.peek(), Some((Token::Or, _))) {
            self.bump();
            let rhs = self.term()?;
            lhs = FeatureExpression::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // term := atom (AND atom)*
    fn term(&mut self) -> Result<FeatureExpression, ExprError> {
        let mut lhs = self.atom()?;
        while matches!(self.peek(), Some((Token::And, _))) {
            self.bump();
            let rhs = self.atom()?;
            lhs = FeatureExpression::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // atom := IDENT | '(' expr ')'
    fn atom(&mut self) -> Result<FeatureExpression, ExprError> {
        match self.bump() {
            Some((Token::Ident(name), _)) => Ok(FeatureExpression::Feature(name)),
            Some((Token::LParen, open_pos)) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some((Token::RParen, _)) => Ok(inner),
                    Some((tok, pos)) => Err(ExprError::ExpectedAtom {
                        found: describe(&tok),
                        pos,
                    }),
                    None => Err(ExprError::UnclosedParen { pos: open_pos }),
                }
            }
            Some((tok, pos)) => Err(ExprError::ExpectedAtom { found: describe(&tok), pos }),
            None => Err(ExprError::ExpectedAtom {
                found: "end of input".to_string(),
                pos: self.end_pos,
            }),
        }
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Ident(name) => format!("'{name}'"),
        Token::And => "'AND'".to_string(),
        Token::Or => "'OR'".to_string(),
        Token::LParen => "'('".to_string(),
        Token::RParen => "')'".to_string(),
    }
}

/// Parses a directive or target/context expression.
pub fn parse_expr(text: &str) -> Result<FeatureExpression, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Empty);
    }
    let mut lexer = Lexer::new(text);
    let mut tokens = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        tokens.push(tok);
    }
    let mut parser = Parser { tokens, cursor: 0, end_pos: lexer.len + 1 };
    let expr = parser.expr()?;
    match parser.bump() {
        None => Ok(expr),
        Some((Token::RParen, pos)) => Err(ExprError::StrayParen { pos }),
        Some((tok, pos)) => Err(ExprError::TrailingInput { found: describe(&tok), pos }),
    }
}

impl FeatureExpression {
    /// Parses from text; see [`parse_expr`].
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        parse_expr(text)
    }

    /// Evaluates under a selection map. Features absent from the map count
    /// as deselected.
    pub fn eval_selection(&self, selection: &HashMap<String, bool>) -> bool {
        match self {
            FeatureExpression::Feature(name) => *selection.get(name).unwrap_or(&false),
            FeatureExpression::And(a, b) => {
                a.eval_selection(selection) && b.eval_selection(selection)
            }
            FeatureExpression::Or(a, b) => {
                a.eval_selection(selection) || b.eval_selection(selection)
            }
        }
    }

    /// Evaluates treating each leaf as true iff its name is in `mentioned`.
    /// This is the "does the directive hold the feature" check applied to a
    /// block's effective condition.
    pub fn eval_mention(&self, mentioned: &HashSet<String>) -> bool {
        match self {
            FeatureExpression::Feature(name) => mentioned.contains(name),
            FeatureExpression::And(a, b) => a.eval_mention(mentioned) && b.eval_mention(mentioned),
            FeatureExpression::Or(a, b) => a.eval_mention(mentioned) || b.eval_mention(mentioned),
        }
    }

    /// Deterministic rendering: leaves are bare, every binary node is
    /// parenthesized with single spaces around the operator. Re-parsing the
    /// result yields a structurally equal tree.
    pub fn canonical_text(&self) -> String {
        match self {
            FeatureExpression::Feature(name) => name.clone(),
            FeatureExpression::And(a, b) => {
                format!("({} AND {})", a.canonical_text(), b.canonical_text())
            }
            FeatureExpression::Or(a, b) => {
                format!("({} OR {})", a.canonical_text(), b.canonical_text())
            }
        }
    }

    /// All feature names mentioned in the expression, sorted and deduplicated.
    pub fn feature_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            FeatureExpression::Feature(name) => {
                out.insert(name.clone());
            }
            FeatureExpression::And(a, b) | FeatureExpression::Or(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
        }
    }

    /// Convenience constructor for a leaf.
    pub fn feature(name: impl Into<String>) -> Self {
        FeatureExpression::Feature(name.into())
    }

    /// Convenience constructor for a conjunction.
    pub fn and(a: FeatureExpression, b: FeatureExpression) -> Self {
        FeatureExpression::And(Box::new(a), Box::new(b))
    }

    /// Convenience constructor for a disjunction.
    pub fn or(a: FeatureExpression, b: FeatureExpression) -> Self {
        FeatureExpression::Or(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for FeatureExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn leaf(name: &str) -> FeatureExpression {
        FeatureExpression::feature(name)
    }

    #[test]
    fn parses_bare_feature() {
        assert_eq!(parse_expr("Commenting").unwrap(), leaf("Commenting"));
    }

    #[test]
    fn parses_disjunction() {
        assert_eq!(
            parse_expr("Highlighting OR Emailing").unwrap(),
            FeatureExpression::or(leaf("Highlighting"), leaf("Emailing"))
        );
    }

    #[test]
    fn and_binds_tighter_than_or() {
        assert_eq!(
            parse_expr("A AND B OR C").unwrap(),
            FeatureExpression::or(FeatureExpression::and(leaf("A"), leaf("B")), leaf("C"))
        );
    }

    #[test]
    fn parens_override_precedence() {
        assert_eq!(
            parse_expr("A AND (B OR C)").unwrap(),
            FeatureExpression::and(leaf("A"), FeatureExpression::or(leaf("B"), leaf("C")))
        );
    }

    #[test]
    fn operators_chain_left_associatively() {
        assert_eq!(
            parse_expr("A OR B OR C").unwrap(),
            FeatureExpression::or(FeatureExpression::or(leaf("A"), leaf("B")), leaf("C"))
        );
    }

    #[test]
    fn rejects_empty_input() {
        assert_eq!(parse_expr(""), Err(ExprError::Empty));
        assert_eq!(parse_expr("   "), Err(ExprError::Empty));
    }

    #[test]
    fn rejects_not_operator_with_position() {
        assert_eq!(
            parse_expr("NOT A"),
            Err(ExprError::UnsupportedOperator { op: "NOT".to_string(), pos: 1 })
        );
        assert_eq!(
            parse_expr("A AND NOT B"),
            Err(ExprError::UnsupportedOperator { op: "NOT".to_string(), pos: 7 })
        );
    }

    #[test]
    fn rejects_xor_operator() {
        assert!(matches!(
            parse_expr("A XOR B"),
            Err(ExprError::UnsupportedOperator { ref op, pos: 3 }) if op == "XOR"
        ));
    }

    #[test]
    fn reports_unbalanced_parens_with_position() {
        assert_eq!(parse_expr("(A OR B"), Err(ExprError::UnclosedParen { pos: 1 }));
        assert_eq!(parse_expr("A OR B)"), Err(ExprError::StrayParen { pos: 7 }));
    }

    #[test]
    fn rejects_dangling_operator() {
        assert!(matches!(parse_expr("A AND"), Err(ExprError::ExpectedAtom { .. })));
        assert!(matches!(parse_expr("OR A"), Err(ExprError::ExpectedAtom { .. })));
    }

    #[test]
    fn rejects_adjacent_idents() {
        assert!(matches!(parse_expr("A B"), Err(ExprError::TrailingInput { pos: 3, .. })));
    }

    #[test]
    fn rejects_non_identifier_characters() {
        assert!(matches!(parse_expr("A & B"), Err(ExprError::UnexpectedChar { ch: '&', pos: 3 })));
    }

    #[test]
    fn feature_names_are_case_sensitive() {
        let sel: HashMap<String, bool> = [("commenting".to_string(), true)].into();
        assert!(!leaf("Commenting").eval_selection(&sel));
    }

    #[test]
    fn eval_selection_or_example() {
        let e = FeatureExpression::or(leaf("Highlighting"), leaf("Emailing"));
        let sel: HashMap<String, bool> = [("Highlighting".to_string(), true)].into();
        assert!(e.eval_selection(&sel));
    }

    #[test]
    fn absent_features_count_as_deselected() {
        assert!(!leaf("Commenting").eval_selection(&HashMap::new()));
    }

    #[test]
    fn eval_selection_matches_and_truth_table() {
        // Exhaustive enumeration over both operands.
        let e = FeatureExpression::and(leaf("A"), leaf("B"));
        for a in [false, true] {
            for b in [false, true] {
                let sel: HashMap<String, bool> =
                    [("A".to_string(), a), ("B".to_string(), b)].into();
                assert_eq!(e.eval_selection(&sel), a && b, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn eval_mention_leaf_against_block_mentions() {
        let mentions: HashSet<String> =
            ["Commenting".to_string(), "Replying".to_string()].into();
        assert!(leaf("Commenting").eval_mention(&mentions));
    }

    #[test]
    fn eval_mention_conjunction_requires_both() {
        let e = FeatureExpression::and(leaf("Commenting"), leaf("Replying"));
        let mentions: HashSet<String> = ["Commenting".to_string()].into();
        assert!(!e.eval_mention(&mentions));
    }

    #[test]
    fn canonical_text_examples() {
        assert_eq!(
            FeatureExpression::or(leaf("Highlighting"), leaf("Emailing")).canonical_text(),
            "(Highlighting OR Emailing)"
        );
        assert_eq!(leaf("Commenting").canonical_text(), "Commenting");
    }

    // Random expression trees for the round-trip and evaluation properties.
    fn arb_expr() -> impl Strategy<Value = FeatureExpression> {
        let names = prop::sample::select(vec!["A", "B", "C", "D", "Efg", "_h1"]);
        let leaf = names.prop_map(FeatureExpression::feature);
        leaf.prop_recursive(5, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| FeatureExpression::and(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| FeatureExpression::or(a, b)),
            ]
        })
    }

    fn arb_mention_set() -> impl Strategy<Value = HashSet<String>> {
        prop::collection::hash_set(
            prop::sample::select(vec!["A", "B", "C", "D", "Efg", "_h1"])
                .prop_map(str::to_string),
            0..6,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn canonical_round_trip(e in arb_expr()) {
            let rendered = e.canonical_text();
            let reparsed = parse_expr(&rendered).unwrap();
            prop_assert_eq!(reparsed, e);
        }

        #[test]
        fn mention_equals_selection_under_indicator_map(e in arb_expr(), s in arb_mention_set()) {
            let indicator: HashMap<String, bool> =
                s.iter().map(|n| (n.clone(), true)).collect();
            prop_assert_eq!(e.eval_mention(&s), e.eval_selection(&indicator));
        }

        #[test]
        fn evaluation_is_monotone(e in arb_expr(), s in arb_mention_set(), extra in "[A-D]") {
            let before = e.eval_mention(&s);
            let mut bigger = s.clone();
            bigger.insert(extra);
            let after = e.eval_mention(&bigger);
            prop_assert!(!before || after, "adding a feature flipped true -> false");
        }

        #[test]
        fn parse_render_parse_is_stable(text in "[ ()]{0,2}[A-C]( (AND|OR) [A-C]){0,3}[ ]{0,2}") {
            // Only check texts that parse; for those, render/re-parse agrees.
            if let Ok(e) = parse_expr(&text) {
                let again = parse_expr(&e.canonical_text()).unwrap();
                prop_assert_eq!(again, e);
            }
        }
    }
}
