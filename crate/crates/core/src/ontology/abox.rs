use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Iri, OntologyError, SignatureViolation, TBox};

/// Upper bound on stored justification text, in bytes.
pub const MAX_JUSTIFICATION_BYTES: usize = 4096;
const TRUNCATION_MARKER: &str = " [truncated]";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Extracted from text, with a natural-language justification.
    Asserted(String),
    /// Derived by the named rule.
    Inferred(String),
}

impl Origin {
    pub fn is_inferred(&self) -> bool {
        matches!(self, Origin::Inferred(_))
    }

    pub fn justification(&self) -> Option<&str> {
        match self {
            Origin::Asserted(j) => Some(j),
            Origin::Inferred(_) => None,
        }
    }
}

/// Trims and bounds a justification. Longer text is cut on a character
/// boundary and suffixed with a marker.
pub fn normalize_justification(text: &str) -> Result<String, OntologyError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(OntologyError::EmptyJustification);
    }
    if text.len() <= MAX_JUSTIFICATION_BYTES {
        return Ok(text.to_string());
    }
    let mut cut = MAX_JUSTIFICATION_BYTES - TRUNCATION_MARKER.len();
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    Ok(format!("{}{TRUNCATION_MARKER}", &text[..cut]))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAssertion {
    pub individual: Iri,
    pub class: Iri,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyAssertion {
    pub subject: Iri,
    pub property: Iri,
    pub object: Iri,
    pub origin: Origin,
}

/// Assertional box. Assertions are keyed by their fact; re-asserting a fact
/// keeps the first origin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ABox {
    individuals: BTreeSet<Iri>,
    classes: BTreeMap<(Iri, Iri), Origin>,
    properties: BTreeMap<(Iri, Iri, Iri), Origin>,
}

impl ABox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn individuals(&self) -> &BTreeSet<Iri> {
        &self.individuals
    }

    pub fn contains_individual(&self, iri: &Iri) -> bool {
        self.individuals.contains(iri)
    }

    pub fn register_individual(&mut self, iri: Iri) -> bool {
        self.individuals.insert(iri)
    }

    /// `(individual, class) → origin`, ordered by individual then class.
    pub fn class_assertions(&self) -> impl Iterator<Item = (&Iri, &Iri, &Origin)> {
        self.classes.iter().map(|((i, c), o)| (i, c, o))
    }

    /// `(subject, property, object) → origin`.
    pub fn property_assertions(&self) -> impl Iterator<Item = (&Iri, &Iri, &Iri, &Origin)> {
        self.properties.iter().map(|((s, p, o), origin)| (s, p, o, origin))
    }

    pub fn class_assertion_count(&self) -> usize {
        self.classes.len()
    }

    pub fn property_assertion_count(&self) -> usize {
        self.properties.len()
    }

    pub fn has_class_assertion(&self, individual: &Iri, class: &Iri) -> bool {
        self.classes.contains_key(&(individual.clone(), class.clone()))
    }

    pub fn has_property_assertion(&self, subject: &Iri, property: &Iri, object: &Iri) -> bool {
        self.properties
            .contains_key(&(subject.clone(), property.clone(), object.clone()))
    }

    pub fn class_origin(&self, individual: &Iri, class: &Iri) -> Option<&Origin> {
        self.classes.get(&(individual.clone(), class.clone()))
    }

    /// Directly asserted or inferred classes of an individual, without
    /// subclass expansion.
    pub fn stated_classes<'a>(&'a self, individual: &'a Iri) -> impl Iterator<Item = &'a Iri> + 'a {
        self.classes
            .range((individual.clone(), Iri::lowest())..)
            .take_while(move |((i, _), _)| i == individual)
            .map(|((_, c), _)| c)
    }

    /// Classes of an individual expanded through the subclass hierarchy.
    pub fn types_of(&self, tbox: &TBox, individual: &Iri) -> BTreeSet<Iri> {
        self.stated_classes(individual)
            .flat_map(|c| tbox.superclasses(c))
            .collect()
    }

    pub fn inferred_count(&self) -> usize {
        self.classes.values().filter(|o| o.is_inferred()).count()
            + self.properties.values().filter(|o| o.is_inferred()).count()
    }

    /// Records `individual ∈ class`. Returns `false` if the fact was
    /// already present.
    pub fn assert_class(
        &mut self,
        tbox: &TBox,
        individual: Iri,
        class: Iri,
        justification: &str,
    ) -> Result<bool, OntologyError> {
        if !tbox.has_class(&class) {
            return Err(OntologyError::Undeclared {
                kind: "class",
                iri: class,
            });
        }
        let justification = normalize_justification(justification)?;
        Ok(self.insert_class(individual, class, Origin::Asserted(justification)))
    }

    /// Records `property(subject, object)`, checking declared domain and
    /// range against the classes already known for both ends.
    pub fn assert_property(
        &mut self,
        tbox: &TBox,
        subject: Iri,
        property: Iri,
        object: Iri,
        justification: &str,
    ) -> Result<bool, OntologyError> {
        let decl = tbox.property(&property).ok_or_else(|| OntologyError::Undeclared {
            kind: "property",
            iri: property.clone(),
        })?;
        if let Some(domain) = &decl.domain {
            if !self.types_of(tbox, &subject).contains(domain) {
                return Err(OntologyError::DomainViolation(Box::new(SignatureViolation {
                    property,
                    individual: subject,
                    expected: domain.clone(),
                })));
            }
        }
        if let Some(range) = &decl.range {
            if !self.types_of(tbox, &object).contains(range) {
                return Err(OntologyError::RangeViolation(Box::new(SignatureViolation {
                    property,
                    individual: object,
                    expected: range.clone(),
                })));
            }
        }
        let justification = normalize_justification(justification)?;
        Ok(self.insert_property(subject, property, object, Origin::Asserted(justification)))
    }

    pub(crate) fn insert_class(&mut self, individual: Iri, class: Iri, origin: Origin) -> bool {
        self.individuals.insert(individual.clone());
        match self.classes.entry((individual, class)) {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(origin);
                true
            }
        }
    }

    pub(crate) fn insert_property(&mut self, subject: Iri, property: Iri, object: Iri, origin: Origin) -> bool {
        self.individuals.insert(subject.clone());
        self.individuals.insert(object.clone());
        match self.properties.entry((subject, property, object)) {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(origin);
                true
            }
        }
    }

    /// Checks that every assertion uses declared vocabulary and that asserted
    /// origins carry a justification.
    pub fn validate(&self, tbox: &TBox) -> Result<(), OntologyError> {
        for ((_, class), origin) in &self.classes {
            if !tbox.has_class(class) {
                return Err(OntologyError::Undeclared {
                    kind: "class",
                    iri: class.clone(),
                });
            }
            check_origin(origin)?;
        }
        for ((_, property, _), origin) in &self.properties {
            if !tbox.has_property(property) {
                return Err(OntologyError::Undeclared {
                    kind: "property",
                    iri: property.clone(),
                });
            }
            check_origin(origin)?;
        }
        Ok(())
    }

    /// Merges `other` into `self`; existing origins win.
    pub fn extend(&mut self, other: &ABox) {
        self.individuals.extend(other.individuals.iter().cloned());
        for (k, v) in &other.classes {
            self.classes.entry(k.clone()).or_insert_with(|| v.clone());
        }
        for (k, v) in &other.properties {
            self.properties.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }

    /// Line-oriented export, one fact per line:
    /// `subject<TAB>predicate<TAB>object<TAB>origin`. Class membership uses
    /// the predicate `a`. Origins render as `asserted:<json string>` or
    /// `inferred:<rule name>`.
    pub fn to_triples(&self) -> String {
        let mut out = String::new();
        for ((i, c), origin) in &self.classes {
            let _ = writeln!(out, "{i}\ta\t{c}\t{}", render_origin(origin));
        }
        for ((s, p, o), origin) in &self.properties {
            let _ = writeln!(out, "{s}\t{p}\t{o}\t{}", render_origin(origin));
        }
        out
    }

    /// Inverse of [`ABox::to_triples`]. Blank lines and `#` comments are
    /// skipped.
    pub fn from_triples(text: &str) -> Result<ABox, OntologyError> {
        let mut abox = ABox::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| OntologyError::TripleSyntax {
                line: n + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.splitn(4, '\t');
            let (Some(s), Some(p), Some(o), Some(origin)) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected four tab-separated fields"));
            };
            let origin = parse_origin(origin).ok_or_else(|| bad("malformed origin"))?;
            let s = Iri::parse(s)?;
            let o = Iri::parse(o)?;
            if p == "a" {
                abox.insert_class(s, o, origin);
            } else {
                abox.insert_property(s, Iri::parse(p)?, o, origin);
            }
        }
        Ok(abox)
    }
}

fn check_origin(origin: &Origin) -> Result<(), OntologyError> {
    match origin {
        Origin::Asserted(j) if j.trim().is_empty() => Err(OntologyError::EmptyJustification),
        _ => Ok(()),
    }
}

fn render_origin(origin: &Origin) -> String {
    match origin {
        Origin::Asserted(j) => format!("asserted:{}", serde_json::Value::String(j.clone())),
        Origin::Inferred(rule) => format!("inferred:{rule}"),
    }
}

fn parse_origin(text: &str) -> Option<Origin> {
    if let Some(json) = text.strip_prefix("asserted:") {
        serde_json::from_str::<String>(json).ok().map(Origin::Asserted)
    } else {
        text.strip_prefix("inferred:")
            .filter(|r| !r.is_empty())
            .map(|r| Origin::Inferred(r.to_string()))
    }
}

/// Flat serialized form used in traces.
#[derive(Serialize, Deserialize)]
struct ABoxRepr {
    individuals: Vec<Iri>,
    class_assertions: Vec<ClassAssertion>,
    property_assertions: Vec<PropertyAssertion>,
}

impl Serialize for ABox {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ABoxRepr {
            individuals: self.individuals.iter().cloned().collect(),
            class_assertions: self
                .class_assertions()
                .map(|(i, c, o)| ClassAssertion {
                    individual: i.clone(),
                    class: c.clone(),
                    origin: o.clone(),
                })
                .collect(),
            property_assertions: self
                .property_assertions()
                .map(|(s, p, o, origin)| PropertyAssertion {
                    subject: s.clone(),
                    property: p.clone(),
                    object: o.clone(),
                    origin: origin.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ABox {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ABoxRepr::deserialize(deserializer)?;
        let mut abox = ABox::new();
        abox.individuals.extend(repr.individuals);
        for a in repr.class_assertions {
            abox.insert_class(a.individual, a.class, a.origin);
        }
        for a in repr.property_assertions {
            abox.insert_property(a.subject, a.property, a.object, a.origin);
        }
        Ok(abox)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iri(s: &str) -> Iri {
        Iri::parse(s).unwrap()
    }

    fn hearsay_tbox() -> TBox {
        let mut t = TBox::new();
        for c in ["h:Statement", "h:OutOfCourtStatement", "h:Assertion"] {
            t.declare_class(iri(c)).unwrap();
        }
        t.add_subclass(iri("h:OutOfCourtStatement"), iri("h:Statement"))
            .unwrap();
        t.declare_property(
            iri("h:hasAssertion"),
            Some(iri("h:Statement")),
            Some(iri("h:Assertion")),
        )
        .unwrap();
        t
    }

    #[test]
    fn class_assertion_recorded_with_origin() {
        let t = hearsay_tbox();
        let mut a = ABox::new();
        assert!(a
            .assert_class(&t, iri("inst:s1"), iri("h:OutOfCourtStatement"), "told his brother")
            .unwrap());
        assert_eq!(a.class_assertion_count(), 1);
        assert_eq!(
            a.class_origin(&iri("inst:s1"), &iri("h:OutOfCourtStatement")),
            Some(&Origin::Asserted("told his brother".into()))
        );
        assert!(a.contains_individual(&iri("inst:s1")));
        assert_eq!(
            a.types_of(&t, &iri("inst:s1")),
            [iri("h:OutOfCourtStatement"), iri("h:Statement")].into_iter().collect()
        );
    }

    #[test]
    fn undeclared_vocabulary_rejected() {
        let t = hearsay_tbox();
        let mut a = ABox::new();
        assert!(a.assert_class(&t, iri("inst:s1"), iri("h:Nope"), "x").is_err());
        assert!(matches!(
            a.assert_property(&t, iri("inst:s1"), iri("h:unknownProp"), iri("inst:a1"), "..."),
            Err(OntologyError::Undeclared { kind: "property", .. })
        ));
    }

    #[test]
    fn duplicate_assertions_are_set_semantics() {
        let t = hearsay_tbox();
        let mut a = ABox::new();
        a.assert_class(&t, iri("inst:s1"), iri("h:Statement"), "first").unwrap();
        a.assert_class(&t, iri("inst:a1"), iri("h:Assertion"), "claim").unwrap();
        assert!(a
            .assert_property(&t, iri("inst:s1"), iri("h:hasAssertion"), iri("inst:a1"), "one")
            .unwrap());
        assert!(!a
            .assert_property(&t, iri("inst:s1"), iri("h:hasAssertion"), iri("inst:a1"), "two")
            .unwrap());
        assert!(!a.assert_class(&t, iri("inst:s1"), iri("h:Statement"), "again").unwrap());
        assert_eq!(a.property_assertion_count(), 1);
        assert_eq!(a.class_assertion_count(), 2);
        assert_eq!(
            a.class_origin(&iri("inst:s1"), &iri("h:Statement")),
            Some(&Origin::Asserted("first".into()))
        );
    }

    #[test]
    fn domain_and_range_checked_eagerly() {
        let t = hearsay_tbox();
        let mut a = ABox::new();
        assert!(matches!(
            a.assert_property(&t, iri("inst:s1"), iri("h:hasAssertion"), iri("inst:a1"), "j"),
            Err(OntologyError::DomainViolation(_))
        ));
        a.assert_class(&t, iri("inst:s1"), iri("h:OutOfCourtStatement"), "j")
            .unwrap();
        assert!(matches!(
            a.assert_property(&t, iri("inst:s1"), iri("h:hasAssertion"), iri("inst:a1"), "j"),
            Err(OntologyError::RangeViolation(_))
        ));
        a.assert_class(&t, iri("inst:a1"), iri("h:Assertion"), "j").unwrap();
        a.assert_property(&t, iri("inst:s1"), iri("h:hasAssertion"), iri("inst:a1"), "j")
            .unwrap();
    }

    #[test]
    fn justification_rules() {
        assert!(matches!(
            normalize_justification("   "),
            Err(OntologyError::EmptyJustification)
        ));
        let long = "é".repeat(3000);
        let cut = normalize_justification(&long).unwrap();
        assert!(cut.len() <= MAX_JUSTIFICATION_BYTES);
        assert!(cut.ends_with(TRUNCATION_MARKER));
        let exact = "x".repeat(MAX_JUSTIFICATION_BYTES);
        assert_eq!(normalize_justification(&exact).unwrap(), exact);
    }

    #[test]
    fn stated_classes_only_for_that_individual() {
        let t = hearsay_tbox();
        let mut a = ABox::new();
        a.assert_class(&t, iri("inst:a"), iri("h:Statement"), "j").unwrap();
        a.assert_class(&t, iri("inst:b"), iri("h:Assertion"), "j").unwrap();
        a.assert_class(&t, iri("inst:b"), iri("h:Statement"), "j").unwrap();
        let b: Vec<_> = a.stated_classes(&iri("inst:b")).cloned().collect();
        assert_eq!(b, vec![iri("h:Assertion"), iri("h:Statement")]);
        assert_eq!(a.stated_classes(&iri("inst:c")).count(), 0);
    }

    #[test]
    fn triples_round_trip() {
        let t = hearsay_tbox();
        let mut a = ABox::new();
        a.assert_class(&t, iri("inst:s1"), iri("h:Statement"), "said \"hi\"\tthen left")
            .unwrap();
        a.assert_class(&t, iri("inst:a1"), iri("h:Assertion"), "claim").unwrap();
        a.assert_property(&t, iri("inst:s1"), iri("h:hasAssertion"), iri("inst:a1"), "j")
            .unwrap();
        a.insert_class(
            iri("inst:s1"),
            iri("h:OutOfCourtStatement"),
            Origin::Inferred("r1".into()),
        );
        let text = a.to_triples();
        assert_eq!(ABox::from_triples(&text).unwrap(), a);
        assert!(ABox::from_triples("inst:s1\ta\th:Statement").is_err());
        assert!(ABox::from_triples("inst:s1\ta\th:Statement\tguessed").is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = hearsay_tbox();
        let mut a = ABox::new();
        a.assert_class(&t, iri("inst:s1"), iri("h:Statement"), "j").unwrap();
        a.register_individual(iri("inst:lonely"));
        let json = serde_json::to_string(&a).unwrap();
        let back: ABox = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
