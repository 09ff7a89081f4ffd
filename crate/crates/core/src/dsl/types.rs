//! Semantic types, the primitive catalog and dataset profiles.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DslError;

/// The closed type vocabulary of the DSL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SemanticType {
    Img,
    Bool,
    Int,
    Object,
    Property,
    Action,
    /// Nested string lists produced by perception functions.
    Scene,
}

impl SemanticType {
    pub const ALL: [SemanticType; 7] = [
        SemanticType::Img,
        SemanticType::Bool,
        SemanticType::Int,
        SemanticType::Object,
        SemanticType::Property,
        SemanticType::Action,
        SemanticType::Scene,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SemanticType::Img => "IMG",
            SemanticType::Bool => "BOOL",
            SemanticType::Int => "INT",
            SemanticType::Object => "OBJECT",
            SemanticType::Property => "PROPERTY",
            SemanticType::Action => "ACTION",
            SemanticType::Scene => "SCENE",
        }
    }

    /// The symbol kind housed by this type, if it is a grounded-symbol type.
    pub fn symbol_kind(self) -> Option<SymbolKind> {
        match self {
            SemanticType::Object => Some(SymbolKind::Object),
            SemanticType::Property => Some(SymbolKind::Property),
            SemanticType::Action => Some(SymbolKind::Action),
            _ => None,
        }
    }
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three grounded symbol types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Object,
    Property,
    Action,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 3] = [SymbolKind::Object, SymbolKind::Property, SymbolKind::Action];

    pub fn semantic_type(self) -> SemanticType {
        match self {
            SymbolKind::Object => SemanticType::Object,
            SymbolKind::Property => SemanticType::Property,
            SymbolKind::Action => SemanticType::Action,
        }
    }
}

/// Which perception function a scene value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Objects,
    Actions,
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::Objects => "objects",
            SceneKind::Actions => "actions",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    VlmFunction,
    SymbolicFunction,
    Operator,
    Constant,
    InputVariable,
}

/// Argument and return types of a primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub args: &'static [SemanticType],
    pub ret: SemanticType,
}

use SemanticType::{Action as A, Bool as B, Img as I, Int as N, Object as O, Property as P, Scene as S};

macro_rules! builtins {
    ($( $variant:ident => $name:literal, $kind:ident, [$($arg:ident),*] -> $ret:ident; )*) => {
        /// Every function symbol the DSL knows about. Profiles and configs select subsets.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Builtin {
            $($variant,)*
        }

        impl Builtin {
            pub const ALL: &'static [Builtin] = &[$(Builtin::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Builtin::$variant => $name,)*
                }
            }

            pub fn kind(self) -> PrimitiveKind {
                match self {
                    $(Builtin::$variant => PrimitiveKind::$kind,)*
                }
            }

            pub fn signature(self) -> Signature {
                match self {
                    $(Builtin::$variant => Signature { args: &[$($arg),*], ret: $ret },)*
                }
            }
        }
    };
}

builtins! {
    GetObjects => "get_objects", VlmFunction, [I] -> S;
    GetActions => "get_actions", VlmFunction, [I] -> S;
    ExistsObject => "exists_object", SymbolicFunction, [S, O] -> B;
    ExistsObjectWithProperty => "exists_object_with_property", SymbolicFunction, [S, O, P] -> B;
    ExistsProperty => "exists_property", SymbolicFunction, [S, P] -> B;
    ExistsAction => "exists_action", SymbolicFunction, [S, A] -> B;
    ExistsActionWithObject => "exists_action_with_object", SymbolicFunction, [S, A, O] -> B;
    ExistsProperties => "exists_properties", SymbolicFunction, [S, P, P] -> B;
    ExistsObjectWithProperties => "exists_object_with_properties", SymbolicFunction, [S, O, P, P] -> B;
    CountObjectInImg => "count_object_in_img", SymbolicFunction, [S, O] -> N;
    CountObjectsWithProperty => "count_objects_with_property", SymbolicFunction, [S, P] -> N;
    MaxObjectsOfSameType => "max_objects_of_same_type", SymbolicFunction, [S] -> N;
    CountAllObjects => "count_all_objects", SymbolicFunction, [S] -> N;
    And => "and", Operator, [B, B] -> B;
    Or => "or", Operator, [B, B] -> B;
    Not => "not", Operator, [B] -> B;
    Xor => "xor", Operator, [B, B] -> B;
    Gt => "gt?", Operator, [N, N] -> B;
    Eq => "eq?", Operator, [N, N] -> B;
    ExistsObjectSmallInImg => "exists_object_small_in_img", VlmFunction, [I, O] -> B;
    ExistsObjectLargeInImg => "exists_object_large_in_img", VlmFunction, [I, O] -> B;
    ExistsObjectWithPropertySmallInImg => "exists_object_with_property_small_in_img", VlmFunction, [I, O, P] -> B;
    ExistsObjectWithPropertyLargeInImg => "exists_object_with_property_large_in_img", VlmFunction, [I, O, P] -> B;
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.iter().copied().find(|b| b.name() == name)
    }

    pub fn arity(self) -> usize {
        self.signature().args.len()
    }

    /// Scene producers: the perception functions that read the scene cache.
    pub fn produces_scene(self) -> Option<SceneKind> {
        match self {
            Builtin::GetObjects => Some(SceneKind::Objects),
            Builtin::GetActions => Some(SceneKind::Actions),
            _ => None,
        }
    }

    /// For scene consumers, which perception function is the natural source of their scene.
    pub fn consumes_scene(self) -> Option<SceneKind> {
        match self {
            Builtin::ExistsObject
            | Builtin::ExistsObjectWithProperty
            | Builtin::ExistsProperty
            | Builtin::ExistsProperties
            | Builtin::ExistsObjectWithProperties
            | Builtin::CountObjectInImg
            | Builtin::CountObjectsWithProperty
            | Builtin::MaxObjectsOfSameType
            | Builtin::CountAllObjects => Some(SceneKind::Objects),
            Builtin::ExistsAction | Builtin::ExistsActionWithObject => Some(SceneKind::Actions),
            _ => None,
        }
    }

    /// The optional size predicates answered by direct yes/no VLM questions.
    pub fn is_size_predicate(self) -> bool {
        matches!(
            self,
            Builtin::ExistsObjectSmallInImg
                | Builtin::ExistsObjectLargeInImg
                | Builtin::ExistsObjectWithPropertySmallInImg
                | Builtin::ExistsObjectWithPropertyLargeInImg
        )
    }

    pub const SIZE_PREDICATES: [Builtin; 4] = [
        Builtin::ExistsObjectSmallInImg,
        Builtin::ExistsObjectLargeInImg,
        Builtin::ExistsObjectWithPropertySmallInImg,
        Builtin::ExistsObjectWithPropertyLargeInImg,
    ];
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A catalog entry: a function symbol, an integer constant, or the input variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    Builtin(Builtin),
    Constant(i64),
    Input,
}

impl Primitive {
    pub fn name(&self) -> String {
        match self {
            Primitive::Builtin(b) => b.name().to_string(),
            Primitive::Constant(c) => c.to_string(),
            Primitive::Input => "IMG".to_string(),
        }
    }

    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Primitive::Builtin(b) => b.kind(),
            Primitive::Constant(_) => PrimitiveKind::Constant,
            Primitive::Input => PrimitiveKind::InputVariable,
        }
    }

    pub fn signature(&self) -> Signature {
        match self {
            Primitive::Builtin(b) => b.signature(),
            Primitive::Constant(_) => Signature { args: &[], ret: SemanticType::Int },
            Primitive::Input => Signature { args: &[], ret: SemanticType::Img },
        }
    }

    pub fn arity(&self) -> usize {
        self.signature().args.len()
    }
}

/// Dataset profiles with their primitive sets and default knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Profile {
    #[serde(rename = "bongard-hoi")]
    BongardHoi,
    #[serde(rename = "bongard-ow")]
    BongardOw,
    #[serde(rename = "bongard-rwr")]
    BongardRwr,
    #[serde(rename = "cocologic")]
    CocoLogic,
    #[serde(rename = "clevr-hans3")]
    ClevrHans3,
    #[serde(rename = "custom")]
    Custom,
}

/// Number of objects, properties and actions requested during grounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolCounts {
    pub objects: usize,
    pub properties: usize,
    pub actions: usize,
}

/// Default search and grounding knobs of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileDefaults {
    pub budget_secs: u64,
    pub max_depth: usize,
    pub counts: SymbolCounts,
}

impl Profile {
    pub const ALL: [Profile; 6] = [
        Profile::BongardHoi,
        Profile::BongardOw,
        Profile::BongardRwr,
        Profile::CocoLogic,
        Profile::ClevrHans3,
        Profile::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::BongardHoi => "bongard-hoi",
            Profile::BongardOw => "bongard-ow",
            Profile::BongardRwr => "bongard-rwr",
            Profile::CocoLogic => "cocologic",
            Profile::ClevrHans3 => "clevr-hans3",
            Profile::Custom => "custom",
        }
    }

    pub fn defaults(self) -> ProfileDefaults {
        let (max_depth, objects, properties, actions) = match self {
            Profile::BongardHoi => (4, 10, 5, 10),
            Profile::BongardOw => (4, 10, 10, 3),
            Profile::BongardRwr => (4, 10, 10, 5),
            Profile::CocoLogic => (6, 10, 10, 3),
            Profile::ClevrHans3 => (6, 10, 10, 0),
            Profile::Custom => (4, 10, 10, 3),
        };
        ProfileDefaults {
            budget_secs: 10,
            max_depth,
            counts: SymbolCounts { objects, properties, actions },
        }
    }

    /// The function symbols available under this profile.
    pub fn builtins(self) -> BTreeSet<Builtin> {
        use Builtin::*;
        let hoi = [
            GetObjects,
            GetActions,
            ExistsObject,
            ExistsObjectWithProperty,
            ExistsProperty,
            ExistsAction,
            ExistsActionWithObject,
            And,
            Or,
            Not,
        ];
        let ow_extra = [ExistsProperties, ExistsObjectWithProperties];
        let counting = [
            CountObjectInImg,
            CountObjectsWithProperty,
            MaxObjectsOfSameType,
            CountAllObjects,
            Xor,
            Gt,
            Eq,
        ];
        let mut set = BTreeSet::new();
        match self {
            Profile::BongardHoi => set.extend(hoi),
            Profile::BongardOw => {
                set.extend(hoi);
                set.extend(ow_extra);
            }
            Profile::BongardRwr => {
                set.extend(hoi);
                set.extend(ow_extra);
                set.extend(counting);
            }
            Profile::CocoLogic => {
                set.extend(hoi);
                set.extend(counting);
            }
            Profile::ClevrHans3 => {
                set.extend(hoi);
                set.extend(ow_extra);
                for b in [GetActions, ExistsAction, ExistsActionWithObject] {
                    set.remove(&b);
                }
            }
            Profile::Custom => {}
        }
        set
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| DslError::UnknownProfile(s.to_string()))
    }
}

/// The resolved set of primitives a grammar and parser may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub builtins: BTreeSet<Builtin>,
    /// Inclusive range of integer constants; empty when no primitive consumes INT.
    pub int_constants: Vec<i64>,
}

impl Catalog {
    pub fn new(builtins: BTreeSet<Builtin>, int_max: i64) -> Self {
        let needs_ints = builtins
            .iter()
            .any(|b| b.signature().args.contains(&SemanticType::Int));
        let int_constants = if needs_ints { (0..=int_max).collect() } else { Vec::new() };
        Catalog { builtins, int_constants }
    }

    pub fn contains(&self, b: Builtin) -> bool {
        self.builtins.contains(&b)
    }

    pub fn is_empty(&self) -> bool {
        self.builtins.is_empty()
    }

    /// Flat list of every primitive, including constants and the input variable.
    pub fn primitives(&self) -> Vec<Primitive> {
        let mut out: Vec<Primitive> = self.builtins.iter().map(|b| Primitive::Builtin(*b)).collect();
        out.extend(self.int_constants.iter().map(|c| Primitive::Constant(*c)));
        if !self.builtins.is_empty() {
            out.push(Primitive::Input);
        }
        out
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.primitives().iter().map(Primitive::name).collect()
    }
}

/// The typed primitive list for a dataset profile.
pub fn catalog(profile: &str) -> Result<Catalog, DslError> {
    let profile: Profile = profile.parse()?;
    Ok(Catalog::new(profile.builtins(), 6))
}
