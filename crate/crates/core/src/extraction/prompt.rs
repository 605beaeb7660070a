use crate::corpus::Excerpt;

pub const PLACEHOLDER: &str = "{specification}";

const BUNDLED_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");

#[derive(Debug, thiserror::Error)]
#[error("prompt template must contain exactly one `{{specification}}` placeholder, found {0}")]
pub struct TemplateError(pub usize);

/// Few-shot extraction prompt with a single `{specification}` slot.
///
/// The doubled braces in the embedded examples are kept as written; they are
/// not format escapes from this type's point of view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, TemplateError> {
        let text = text.into();
        match text.matches(PLACEHOLDER).count() {
            1 => Ok(PromptTemplate { text }),
            n => Err(TemplateError(n)),
        }
    }

    /// The two-example astronomy template shipped with the crate.
    pub fn few_shot() -> Self {
        PromptTemplate::new(BUNDLED_TEMPLATE).expect("bundled template has one placeholder")
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Single-pass substitution: placeholder text inside `specification`
    /// is copied through untouched.
    pub fn render(&self, specification: &str) -> String {
        let at = self.text.find(PLACEHOLDER).expect("validated on construction");
        let mut out = String::with_capacity(self.text.len() - PLACEHOLDER.len() + specification.len());
        out.push_str(&self.text[..at]);
        out.push_str(specification);
        out.push_str(&self.text[at + PLACEHOLDER.len()..]);
        out
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::few_shot()
    }
}

pub fn build_prompt(excerpt: &Excerpt, template: &PromptTemplate) -> String {
    template.render(&excerpt.text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn excerpt(text: &str) -> Excerpt {
        Excerpt {
            id: "e".into(),
            doc_id: "d".into(),
            text: text.into(),
            term: "Apollo".into(),
            word_count: crate::corpus::word_count(text),
            gold_label: None,
        }
    }

    #[test]
    fn template_validation() {
        assert!(PromptTemplate::new("no slot").is_err());
        assert!(PromptTemplate::new("{specification} {specification}").is_err());
        assert!(PromptTemplate::new("a {specification} b").is_ok());
    }

    #[test]
    fn length_identity() {
        let t = PromptTemplate::few_shot();
        for text in ["", "X", "Apollo 11 landed on the Moon."] {
            let p = build_prompt(&excerpt(text), &t);
            assert_eq!(p.len(), t.text().len() - PLACEHOLDER.len() + text.len());
        }
    }

    #[test]
    fn literal_placeholder_in_excerpt_survives() {
        let t = PromptTemplate::new("<{specification}>").unwrap();
        assert_eq!(build_prompt(&excerpt("a {specification} b"), &t), "<a {specification} b>");
        assert_eq!(build_prompt(&excerpt(""), &t), "<>");
    }

    #[test]
    fn bundled_template_shape() {
        let t = PromptTemplate::few_shot();
        assert!(t.text().starts_with("Based on the following two examples"));
        assert!(t.text().contains("generate and extract entities and relations as in the provided example"));
        assert!(t.text().ends_with("# Specification\n{specification}\n################\n\n# Output\n"));
    }
}
