//! Few-shot prompt templates for the language-model stages.

use serde::{Deserialize, Serialize};

/// One `(input, expected output)` demonstration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
}

impl Exemplar {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Self {
        Exemplar {
            input: input.into(),
            output: output.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
    pub exemplars: Vec<Exemplar>,
}

impl PromptTemplate {
    pub fn new(instruction: impl Into<String>, exemplars: Vec<Exemplar>) -> Self {
        PromptTemplate {
            instruction: instruction.into(),
            exemplars,
        }
    }

    /// Template that turns a style keyword into a list of concrete visual traits.
    pub fn style_elaboration() -> Self {
        Self::new(
            "Describe the visual characteristics of the given art style as a comma-separated list of concrete traits.",
            vec![
                Exemplar::new(
                    "Chinese ink painting",
                    "monochrome ink washes on rice paper, expressive brushwork, generous empty space, misty layered mountains",
                ),
                Exemplar::new(
                    "anime",
                    "clean line art, flat cel shading, saturated colours, large expressive eyes, crisp sky gradients",
                ),
            ],
        )
    }

    /// Template that merges content, object positions and style traits into one sentence.
    pub fn fusion() -> Self {
        Self::new(
            "Combine the caption, the objects with their positions and the style description into one fluent image prompt. Mention every object.",
            vec![Exemplar::new(
                "caption: a cat on a sofa | objects: cat (center), lamp (right) | style: clean line art, flat cel shading",
                "an anime illustration of a cat curled up in the center of a sofa with a lamp on the right, clean line art and flat cel shading",
            )],
        )
    }

    pub fn has_exemplars(&self) -> bool {
        !self.exemplars.is_empty()
    }

    /// Plain-text few-shot prompt for a completion-style model.
    pub fn render(&self, input: &str) -> String {
        let mut out = String::new();
        out.push_str(&self.instruction);
        out.push_str("\n\n");
        for ex in &self.exemplars {
            out.push_str("Input: ");
            out.push_str(&ex.input);
            out.push_str("\nOutput: ");
            out.push_str(&ex.output);
            out.push_str("\n\n");
        }
        out.push_str("Input: ");
        out.push_str(input);
        out.push_str("\nOutput:");
        out
    }
}

/// The two templates the text-tuning stage needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub elaborate: PromptTemplate,
    pub fuse: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            elaborate: PromptTemplate::style_elaboration(),
            fuse: PromptTemplate::fusion(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_orders_exemplars_then_query() {
        let t = PromptTemplate::new("Do it.", vec![Exemplar::new("a", "b"), Exemplar::new("c", "d")]);
        assert_eq!(
            t.render("x"),
            "Do it.\n\nInput: a\nOutput: b\n\nInput: c\nOutput: d\n\nInput: x\nOutput:"
        );
    }

    #[test]
    fn defaults_carry_exemplars() {
        let t = Templates::default();
        assert!(t.elaborate.has_exemplars() && t.fuse.has_exemplars());
    }
}
