use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::program::normalize_symbol;
use super::types::{Builtin, Catalog, Profile};
use super::DslError;

fn default_int_max() -> i64 {
    6
}

/// User-editable DSL configuration, stored as TOML.
///
/// ```toml
/// profile = "clevr-hans3"
/// enabled_primitives = ["and", "exists_object", "get_objects", "not", "or"]
/// int_constant_max = 6
/// removed_symbols = ["gold", "red"]
/// extra_perception_predicates = ["exists_object_small_in_img"]
/// strict_scene_typing = false
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DslConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(default)]
    pub enabled_primitives: BTreeSet<String>,
    #[serde(default = "default_int_max")]
    pub int_constant_max: i64,
    #[serde(default)]
    pub removed_symbols: BTreeSet<String>,
    #[serde(default)]
    pub extra_perception_predicates: BTreeSet<String>,
    #[serde(default)]
    pub strict_scene_typing: bool,
}

impl Default for DslConfig {
    fn default() -> Self {
        DslConfig::for_profile(Profile::Custom)
    }
}

/// One DSL editing directive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DslEdit {
    AddPrimitive(String),
    RemovePrimitive(String),
    RemoveSymbol(String),
    RestoreSymbol(String),
    AddSizePredicates,
    RemoveSizePredicates,
}

impl DslConfig {
    pub fn for_profile(profile: Profile) -> Self {
        DslConfig {
            profile: Some(profile),
            enabled_primitives: profile.builtins().iter().map(|b| b.name().to_string()).collect(),
            int_constant_max: default_int_max(),
            removed_symbols: BTreeSet::new(),
            extra_perception_predicates: BTreeSet::new(),
            strict_scene_typing: false,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DslError> {
        let cfg: DslConfig = toml::from_str(text).map_err(|e| DslError::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg.normalized())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("DslConfig always serializes")
    }

    pub fn load(path: &Path) -> Result<Self, DslError> {
        let text = std::fs::read_to_string(path).map_err(|e| DslError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DslError> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| DslError::Io(path.display().to_string(), e.to_string()))
    }

    fn normalized(mut self) -> Self {
        self.removed_symbols = self.removed_symbols.iter().map(|s| normalize_symbol(s)).collect();
        self
    }

    pub fn validate(&self) -> Result<(), DslError> {
        for name in &self.enabled_primitives {
            if Builtin::from_name(name).is_none_or(|b| b.is_size_predicate()) {
                return Err(unknown_primitive(name));
            }
        }
        for name in &self.extra_perception_predicates {
            if !Builtin::from_name(name).is_some_and(|b| b.is_size_predicate()) {
                return Err(DslError::UnknownPrimitive {
                    name: name.clone(),
                    valid: Builtin::SIZE_PREDICATES.iter().map(|b| b.name().to_string()).collect(),
                });
            }
        }
        if self.int_constant_max < 0 {
            return Err(DslError::Format("int_constant_max must be >= 0".into()));
        }
        Ok(())
    }

    /// The primitives this configuration enables.
    pub fn catalog(&self) -> Catalog {
        let builtins = self
            .enabled_primitives
            .iter()
            .chain(&self.extra_perception_predicates)
            .filter_map(|n| Builtin::from_name(n))
            .collect();
        Catalog::new(builtins, self.int_constant_max)
    }

    pub fn is_removed(&self, symbol: &str) -> bool {
        self.removed_symbols.contains(&normalize_symbol(symbol))
    }

    /// Applies edits in order. `known_symbols`, when given, is used to reject removals of
    /// symbols that were never grounded.
    pub fn apply_edits(&mut self, edits: &[DslEdit], known_symbols: Option<&BTreeSet<String>>) -> Result<(), DslError> {
        for edit in edits {
            match edit {
                DslEdit::AddPrimitive(name) => match Builtin::from_name(name) {
                    Some(b) if b.is_size_predicate() => {
                        self.extra_perception_predicates.insert(name.clone());
                    }
                    Some(_) => {
                        self.enabled_primitives.insert(name.clone());
                    }
                    None => return Err(unknown_primitive(name)),
                },
                DslEdit::RemovePrimitive(name) => {
                    let removed = self.enabled_primitives.remove(name) | self.extra_perception_predicates.remove(name);
                    if !removed {
                        return Err(DslError::UnknownPrimitive {
                            name: name.clone(),
                            valid: self
                                .enabled_primitives
                                .iter()
                                .chain(&self.extra_perception_predicates)
                                .cloned()
                                .collect(),
                        });
                    }
                }
                DslEdit::RemoveSymbol(sym) => {
                    let sym = normalize_symbol(sym);
                    if let Some(known) = known_symbols {
                        if !known.contains(&sym) {
                            return Err(DslError::UnknownSymbol { name: sym, valid: known.iter().cloned().collect() });
                        }
                    }
                    self.removed_symbols.insert(sym);
                }
                DslEdit::RestoreSymbol(sym) => {
                    self.removed_symbols.remove(&normalize_symbol(sym));
                }
                DslEdit::AddSizePredicates => {
                    self.extra_perception_predicates
                        .extend(Builtin::SIZE_PREDICATES.iter().map(|b| b.name().to_string()));
                }
                DslEdit::RemoveSizePredicates => self.extra_perception_predicates.clear(),
            }
        }
        Ok(())
    }
}

fn unknown_primitive(name: &str) -> DslError {
    DslError::UnknownPrimitive {
        name: name.to_string(),
        valid: Builtin::ALL
            .iter()
            .filter(|b| !b.is_size_predicate())
            .map(|b| b.name().to_string())
            .collect(),
    }
}
