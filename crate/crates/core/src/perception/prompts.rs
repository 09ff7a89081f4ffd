//! Prompt templates with `{name}` placeholders.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dsl::Builtin;

pub const GROUND_OBJECTS: &str = "ground_objects";
pub const GROUND_PROPERTIES: &str = "ground_properties";
pub const GROUND_ACTIONS: &str = "ground_actions";
pub const GET_OBJECTS: &str = "get_objects";
pub const GET_ACTIONS: &str = "get_actions";

const BUILTIN_TEMPLATES: [(&str, &str); 9] = [
    (GROUND_OBJECTS, include_str!("prompts/ground_objects.txt")),
    (GROUND_PROPERTIES, include_str!("prompts/ground_properties.txt")),
    (GROUND_ACTIONS, include_str!("prompts/ground_actions.txt")),
    (GET_OBJECTS, include_str!("prompts/get_objects.txt")),
    (GET_ACTIONS, include_str!("prompts/get_actions.txt")),
    ("exists_object_small_in_img", include_str!("prompts/exists_object_small_in_img.txt")),
    ("exists_object_large_in_img", include_str!("prompts/exists_object_large_in_img.txt")),
    ("exists_object_with_property_small_in_img", include_str!("prompts/exists_object_with_property_small_in_img.txt")),
    ("exists_object_with_property_large_in_img", include_str!("prompts/exists_object_with_property_large_in_img.txt")),
];

/// Named templates; defaults are compiled in and may be overridden from a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        let templates = BUILTIN_TEMPLATES
            .iter()
            .map(|(name, text)| (name.to_string(), text.strip_suffix('\n').unwrap_or(text).to_string()))
            .collect();
        PromptSet { templates }
    }
}

impl PromptSet {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> &str {
        self.templates.get(name).map(String::as_str).unwrap_or_else(|| panic!("no prompt template `{name}`"))
    }

    /// Replaces templates with `<name>.txt` files found in `dir`. Unknown names are ignored.
    pub fn with_overrides(mut self, dir: &Path) -> std::io::Result<Self> {
        for (name, text) in self.templates.iter_mut() {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                let t = std::fs::read_to_string(&path)?;
                *text = t.strip_suffix('\n').unwrap_or(&t).to_string();
            }
        }
        Ok(self)
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> String {
        render(self.get(name), vars)
    }

    pub fn size_template(&self, predicate: Builtin) -> &str {
        self.get(predicate.name())
    }
}

/// Substitutes `{key}` for each provided key in one pass; other braces are left alone.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter().find(|(k, _)| *k == key).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders a list the way the templates show lists: `["a", "b"]`.
pub fn list_literal<S: AsRef<str>>(items: &[S]) -> String {
    let quoted: Vec<String> =
        items.iter().map(|s| serde_json::to_string(s.as_ref()).expect("string serializes")).collect();
    format!("[{}]", quoted.join(", "))
}
