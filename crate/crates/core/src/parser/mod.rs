//! Parser for `.btq` documents.
//!
//! ```text
//! File        := TreeDecl+
//! TreeDecl    := "BehaviorTree" "ID" "=" STRING NEWLINE INDENT Node DEDENT
//! Node        := (CtrlSym | DecoKw [Param*] | "Action" IDENT | "Condition" IDENT
//!                 | "SubTree" IDENT) [Annot] NEWLINE [INDENT Node+ DEDENT]
//! CtrlSym     := "->" | "?" | "=>" | "r->" | "r?"
//! Param       := IDENT "=" STRING
//! Annot       := "(" [ "name" "=" STRING ] [ Param* ]
//!                    [ "satisfices" QualityRef+ ] [ "satisfies" ReqRef+ ] ")"
//! QualityRef  := "Quality" "=" STRING [ "(" ReqDecl+ ")" ]
//! ReqRef      := ReqDecl | "QualityReq" "ID" "=" STRING
//! ReqDecl     := "QualityReq" "ID" "=" STRING "description" "=" STRING
//!                [ "successIf" "=" STRING ] [ "failureIf" "=" STRING ]
//! ```
//!
//! A requirement declared inside a quality block is linked to that quality;
//! nodes satisfy requirements only through their `satisfies` clause.

mod format;
pub mod lexer;

use std::collections::BTreeMap;

use crate::diagnostic::{has_errors, sort_diagnostics, Diagnostic, Location};
use crate::model::{
    validate, BehaviorTree, BehaviorTreeModel, Constraint, NodeKind, Quality,
    QualityRequirement, RequirementRegistry, TreeNode,
};

pub use format::format_model;
pub use lexer::{tokenize, SourceFile, Token, TokenKind};

/// Parses and validates a document. Fails if any diagnostic is an error;
/// warnings are left for callers to obtain through [`validate`].
pub fn parse(src: &SourceFile) -> Result<BehaviorTreeModel, Vec<Diagnostic>> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        file: &src.path,
        tokens,
        pos: 0,
        diagnostics: Vec::new(),
        registry: RequirementRegistry::new(),
    };
    let trees = p.file();
    if !p.diagnostics.is_empty() {
        sort_diagnostics(&mut p.diagnostics);
        return Err(p.diagnostics);
    }

    let model = BehaviorTreeModel::new(trees, p.registry);
    let diagnostics = validate(&model);
    if has_errors(&diagnostics) {
        return Err(diagnostics);
    }
    Ok(model)
}

/// Marker for a reported syntax error; the diagnostic is already recorded.
struct Reported;

type PResult<T> = Result<T, Reported>;

struct Parser<'a> {
    file: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    diagnostics: Vec<Diagnostic>,
    registry: RequirementRegistry,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn at(&self, kind: TokenKind) -> bool {
        self.peek().kind == kind
    }

    fn at_keyword(&self, word: &str) -> bool {
        self.peek().is_keyword(word)
    }

    fn bump(&mut self) -> Token {
        let tok = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn location(&self, tok: &Token) -> Location {
        Location::new(self.file, tok.line, tok.column)
    }

    fn error_at(&mut self, code: &'static str, message: impl Into<String>, tok: &Token) -> Reported {
        let location = self.location(tok);
        self.diagnostics.push(Diagnostic::error(code, message, location));
        Reported
    }

    fn unexpected(&mut self, expected: &str) -> Reported {
        let tok = self.peek().clone();
        let found = match tok.kind {
            TokenKind::Keyword | TokenKind::Ident => format!("`{}`", tok.text),
            other => other.to_string(),
        };
        self.error_at("E202", format!("expected {expected}, found {found}"), &tok)
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if self.at(kind) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    fn expect_keyword(&mut self, word: &str) -> PResult<Token> {
        if self.at_keyword(word) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    /// `<keyword> = STRING`
    fn keyword_string(&mut self, word: &str) -> PResult<Token> {
        self.expect_keyword(word)?;
        self.expect(TokenKind::Equals)?;
        self.expect(TokenKind::Str)
    }

    /// Skips the remainder of the current logical line.
    fn skip_line(&mut self) {
        while !matches!(self.peek().kind, TokenKind::Newline | TokenKind::Eof) {
            self.bump();
        }
        if self.at(TokenKind::Newline) {
            self.bump();
        }
    }

    /// Skips an indented block, if one follows, parsing it for diagnostics.
    fn discard_block(&mut self) {
        if self.at(TokenKind::Indent) {
            self.bump();
            self.block();
        }
    }

    fn file(&mut self) -> Vec<BehaviorTree> {
        let mut trees = Vec::new();
        while !self.at(TokenKind::Eof) {
            if self.at_keyword("BehaviorTree") {
                if let Some(tree) = self.tree() {
                    trees.push(tree);
                }
            } else if self.at(TokenKind::Indent) {
                let tok = self.bump();
                self.error_at("E203", "unexpected indentation", &tok);
                self.block();
            } else {
                self.unexpected("`BehaviorTree`");
                self.skip_line();
                self.discard_block();
            }
        }
        if trees.is_empty() && self.diagnostics.is_empty() {
            let tok = self.peek().clone();
            self.error_at("E204", "a document must declare at least one BehaviorTree", &tok);
        }
        trees
    }

    fn tree(&mut self) -> Option<BehaviorTree> {
        let head = self.peek().clone();
        let header = (|| -> PResult<Token> {
            self.expect_keyword("BehaviorTree")?;
            let id = self.keyword_string("ID")?;
            self.expect(TokenKind::Newline)?;
            Ok(id)
        })();
        let id = match header {
            Ok(id) => id,
            Err(Reported) => {
                self.skip_line();
                self.discard_block();
                return None;
            }
        };

        let mut roots = Vec::new();
        let reported = self.diagnostics.len();
        if self.at(TokenKind::Indent) {
            self.bump();
            roots = self.block();
        }
        // A root that failed to parse has already been reported.
        if roots.is_empty() && self.diagnostics.len() > reported {
            return None;
        }
        if roots.len() != 1 {
            self.error_at(
                "E201",
                format!("tree requires exactly one root node, found {}", roots.len()),
                &head,
            );
            return None;
        }
        Some(BehaviorTree {
            id: id.text,
            root: roots.pop().expect("one root"),
            location: self.location(&head),
        })
    }

    /// Nodes up to the matching DEDENT (consumed).
    fn block(&mut self) -> Vec<TreeNode> {
        let mut nodes = Vec::new();
        loop {
            match self.peek().kind {
                TokenKind::Dedent => {
                    self.bump();
                    break;
                }
                TokenKind::Eof => break,
                TokenKind::Indent => {
                    let tok = self.bump();
                    self.error_at("E203", "unexpected indentation", &tok);
                    self.block();
                }
                _ => {
                    if let Some(node) = self.node() {
                        nodes.push(node);
                    }
                }
            }
        }
        nodes
    }

    fn node(&mut self) -> Option<TreeNode> {
        let head = self.peek().clone();
        let parsed = self.node_line();
        let node = match parsed {
            Ok(node) => node,
            Err(Reported) => {
                self.skip_line();
                self.discard_block();
                return None;
            }
        };
        let mut node = node;
        node.location = self.location(&head);
        if self.at(TokenKind::Indent) {
            self.bump();
            node.children = self.block();
        }
        Some(node)
    }

    /// Node head, optional annotation, and the terminating NEWLINE.
    fn node_line(&mut self) -> PResult<TreeNode> {
        let tok = self.peek().clone();
        let control = match tok.kind {
            TokenKind::Arrow => Some(NodeKind::Sequence),
            TokenKind::Question => Some(NodeKind::Fallback),
            TokenKind::Parallel => Some(NodeKind::Parallel),
            TokenKind::RArrow => Some(NodeKind::ReactiveSequence),
            TokenKind::RQuestion => Some(NodeKind::ReactiveFallback),
            _ => None,
        };
        let mut node = if let Some(kind) = control {
            self.bump();
            TreeNode::new(kind)
        } else if tok.kind == TokenKind::Keyword {
            match decorator_kind(&tok.text) {
                Some(kind) => {
                    self.bump();
                    let mut node = TreeNode::new(kind);
                    while self.at(TokenKind::Ident) {
                        self.param(&mut node.params)?;
                    }
                    node
                }
                None => {
                    let kind = match tok.text.as_str() {
                        "Action" => NodeKind::Action,
                        "Condition" => NodeKind::Condition,
                        "SubTree" => NodeKind::SubTreeRef,
                        _ => return Err(self.unexpected("a node")),
                    };
                    self.bump();
                    let id = self.expect(TokenKind::Ident)?;
                    let mut node = TreeNode::new(kind);
                    node.ref_id = id.text;
                    node
                }
            }
        } else {
            return Err(self.unexpected("a node"));
        };

        if self.at(TokenKind::LParen) {
            self.annotation(&mut node)?;
        }
        self.expect(TokenKind::Newline)?;
        Ok(node)
    }

    fn param(&mut self, params: &mut BTreeMap<String, String>) -> PResult<()> {
        let key = self.expect(TokenKind::Ident)?;
        self.expect(TokenKind::Equals)?;
        let value = self.expect(TokenKind::Str)?;
        if params.insert(key.text.clone(), value.text).is_some() {
            return Err(self.error_at("E205", format!("duplicate parameter `{}`", key.text), &key));
        }
        Ok(())
    }

    fn annotation(&mut self, node: &mut TreeNode) -> PResult<()> {
        self.expect(TokenKind::LParen)?;
        if self.at_keyword("name") {
            node.display_name = Some(self.keyword_string("name")?.text);
        }
        while self.at(TokenKind::Ident) {
            self.param(&mut node.params)?;
        }
        if self.at_keyword("satisfices") {
            self.bump();
            if !self.at_keyword("Quality") {
                return Err(self.unexpected("`Quality`"));
            }
            while self.at_keyword("Quality") {
                let quality = self.quality_ref()?;
                node.satisfices.push(quality);
            }
        }
        if self.at_keyword("satisfies") {
            self.bump();
            if !self.at_keyword("QualityReq") {
                return Err(self.unexpected("`QualityReq`"));
            }
            while self.at_keyword("QualityReq") {
                let id = self.requirement(None, true)?;
                node.satisfies.push(id);
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(())
    }

    fn quality_ref(&mut self) -> PResult<Quality> {
        let label = self.keyword_string("Quality")?;
        let quality = Quality::from_label(&label.text);
        if self.at(TokenKind::LParen) {
            self.bump();
            if !self.at_keyword("QualityReq") {
                return Err(self.unexpected("`QualityReq`"));
            }
            while self.at_keyword("QualityReq") {
                self.requirement(Some(&quality), false)?;
            }
            self.expect(TokenKind::RParen)?;
        }
        Ok(quality)
    }

    /// A requirement declaration, or (when `allow_reference`) a bare
    /// back-reference. Returns the requirement id.
    fn requirement(&mut self, quality: Option<&Quality>, allow_reference: bool) -> PResult<String> {
        let head = self.expect_keyword("QualityReq")?;
        self.expect_keyword("ID")?;
        self.expect(TokenKind::Equals)?;
        let id = self.expect(TokenKind::Str)?.text;
        if allow_reference && !self.at_keyword("description") {
            return Ok(id);
        }
        let description = self.keyword_string("description")?.text;
        let mut requirement = QualityRequirement::new(id.clone(), description);
        requirement.quality = quality.cloned();

        loop {
            let (slot, word) = if self.at_keyword("successIf") {
                (&mut requirement.success_if, "successIf")
            } else if self.at_keyword("failureIf") {
                (&mut requirement.failure_if, "failureIf")
            } else {
                break;
            };
            let kw = self.peek().clone();
            if slot.is_some() {
                return Err(self.error_at("E205", format!("duplicate `{word}` clause"), &kw));
            }
            let source = self.keyword_string(word)?;
            match Constraint::parse(&source.text) {
                Ok(c) => *slot = Some(c),
                Err(err) => {
                    let column = match &err {
                        crate::condexpr::ExprError::Syntax { column, .. } => source.column + column,
                        _ => source.column,
                    };
                    self.diagnostics.push(Diagnostic::error(
                        err.code(),
                        format!("in `{word}`: {err}"),
                        Location::new(self.file, source.line, column),
                    ));
                    return Err(Reported);
                }
            }
        }

        let location = self.location(&head);
        self.registry.declare(requirement, location);
        Ok(id)
    }
}

fn decorator_kind(word: &str) -> Option<NodeKind> {
    Some(match word {
        "Inverter" => NodeKind::Inverter,
        "Repeat" => NodeKind::Repeat,
        "RetryUntilSuccessful" => NodeKind::RetryUntilSuccessful,
        "ForceSuccess" => NodeKind::ForceSuccess,
        "ForceFailure" => NodeKind::ForceFailure,
        "KeepRunningUntilFailure" => NodeKind::KeepRunningUntilFailure,
        _ => return None,
    })
}
