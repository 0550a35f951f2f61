//! Small hand-built graphs modelled on the cholestasis diagnosis path.

use super::{codes, labels, Graph, GraphError, Node, NodeKind, ReferenceRange};

/// Polarity suffixes used on condition node ids (`<Parameter>_<level>`).
pub const POLARITIES: [&str; 2] = ["increased", "decreased"];

/// Adds a lab parameter with its reference range and the two pathological
/// polarity nodes `<name>_increased` / `<name>_decreased`.
pub fn add_lab_parameter(
    g: &mut Graph,
    name: &str,
    loinc: &str,
    range: &ReferenceRange,
) -> Result<(), GraphError> {
    g.add_node(Node::new(name, NodeKind::Parameter).with_code(codes::LOINC, loinc))?;
    let range_id = format!("{name}_range");
    g.add_node(range.to_node(&range_id))?;
    g.add_edge(name, labels::HAS_REFERENCE_RANGE, &range_id)?;
    for level in POLARITIES {
        let id = format!("{name}_{level}");
        g.add_node(
            Node::new(&id, NodeKind::PathologicalReferenceRange)
                .with_property("parameter", name)
                .with_property("level", level),
        )?;
        g.add_edge(&id, labels::RANGE_OF, name)?;
    }
    Ok(())
}

fn range(parameter: &str, lower: Option<f64>, upper: Option<f64>, unit: &str) -> ReferenceRange {
    ReferenceRange::new(parameter, lower, upper, unit).expect("fixture ranges are valid")
}

fn build(f: impl FnOnce(&mut Graph) -> Result<(), GraphError>) -> Graph {
    let mut g = Graph::new();
    f(&mut g).expect("fixture construction is consistent");
    g
}

/// Diagnosis path for cholestasis: an examination rule over symptoms, a
/// laboratory rule over three parameters and an imaging rule.
pub fn cholestasis() -> Graph {
    build(|g| {
        g.add_node(
            Node::new("Cholestase_(Ikterus)", NodeKind::Disease)
                .with_label("Cholestasis (jaundice)")
                .with_code(codes::ICD10, "K83.1"),
        )?;
        g.add_node(Node::new("Liver", NodeKind::Organ))?;
        g.add_edge("Cholestase_(Ikterus)", labels::AFFECTS, "Liver")?;
        g.add_node(Node::new("Serum", NodeKind::Sample))?;

        add_lab_parameter(g, "Bilirubin_total", "1975-2", &range("Bilirubin_total", Some(0.3), Some(1.2), "mg/dl"))?;
        add_lab_parameter(
            g,
            "Alkaline_Phosphatase",
            "6768-6",
            &range("Alkaline_Phosphatase", Some(40.0), Some(130.0), "U/l"),
        )?;
        add_lab_parameter(g, "Gamma_GT", "2324-2", &range("Gamma_GT", None, Some(60.0), "U/l"))?;
        for p in ["Bilirubin_total", "Alkaline_Phosphatase", "Gamma_GT"] {
            g.add_edge(p, labels::MEASURED_IN, "Serum")?;
        }

        for (id, snomed) in [
            ("Jaundice", "18165001"),
            ("Pruritus", "418290006"),
            ("Upper_abdominal_pain", "21522001"),
        ] {
            g.add_node(Node::new(id, NodeKind::Finding).with_code(codes::SNOMED, snomed))?;
        }
        g.add_node(Node::new("Dilated_bile_ducts", NodeKind::ImagingResult))?;
        g.add_node(Node::new("Abdominal_ultrasound", NodeKind::ImagingProcedure))?;
        g.add_edge("Dilated_bile_ducts", labels::MEASURED_IN, "Abdominal_ultrasound")?;

        g.add_node(Node::new("Rule_Cholestase_Examination", NodeKind::ExaminationRule))?;
        g.add_node(Node::new("Rule_Cholestase", NodeKind::LaboratoryRule))?;
        g.add_node(Node::new("Rule_Cholestase_Imaging", NodeKind::ImagingRule))?;
        for rule in ["Rule_Cholestase_Examination", "Rule_Cholestase", "Rule_Cholestase_Imaging"] {
            g.add_edge("Cholestase_(Ikterus)", labels::HAS_RULE, rule)?;
        }
        for f in ["Jaundice", "Pruritus", "Upper_abdominal_pain"] {
            g.add_edge("Rule_Cholestase_Examination", labels::SIGNALS_BY, f)?;
        }
        for c in ["Bilirubin_total_increased", "Alkaline_Phosphatase_increased", "Gamma_GT_increased"] {
            g.add_edge("Rule_Cholestase", labels::SIGNALS_BY, c)?;
        }
        g.add_edge("Rule_Cholestase_Imaging", labels::SIGNALS_BY, "Dilated_bile_ducts")?;
        Ok(())
    })
}

/// One rule with two increased-polarity conditions and their unused
/// decreased opposites.
pub fn cholestasis_fragment() -> Graph {
    build(|g| {
        g.add_node(
            Node::new("Cholestase_(Ikterus)", NodeKind::Disease).with_code(codes::ICD10, "K83.1"),
        )?;
        add_lab_parameter(g, "Bilirubin_total", "1975-2", &range("Bilirubin_total", Some(0.3), Some(1.2), "mg/dl"))?;
        add_lab_parameter(
            g,
            "Alkaline_Phosphatase",
            "6768-6",
            &range("Alkaline_Phosphatase", Some(40.0), Some(130.0), "U/l"),
        )?;
        g.add_node(Node::new("Rule_Cholestase", NodeKind::LaboratoryRule))?;
        g.add_edge("Cholestase_(Ikterus)", labels::HAS_RULE, "Rule_Cholestase")?;
        g.add_edge("Rule_Cholestase", labels::SIGNALS_BY, "Bilirubin_total_increased")?;
        g.add_edge("Rule_Cholestase", labels::SIGNALS_BY, "Alkaline_Phosphatase_increased")?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholestasis_path_shape() {
        let g = cholestasis();
        assert_eq!(g.nodes_of_kind(NodeKind::Disease).count(), 1);
        assert_eq!(g.nodes_of_kind(NodeKind::LaboratoryRule).count(), 1);
        assert!(g.nodes_of_kind(NodeKind::Parameter).count() >= 3);
        assert!(g.contains_triple("Rule_Cholestase", "signals_by", "Bilirubin_total_increased"));
        let lab_conditions = g.out_edges("Rule_Cholestase").count();
        assert_eq!(lab_conditions, 3);
        assert!(crate::graph::validate(&g).is_ok());
        assert_eq!(g.nodes().filter(|n| n.kind.is_augmentation_only()).count(), 0);
    }

    #[test]
    fn fragment_has_opposites_without_edges() {
        let g = cholestasis_fragment();
        assert!(g.contains_node("Bilirubin_total_decreased"));
        assert!(!g.connected("Rule_Cholestase", "Bilirubin_total_decreased"));
    }
}
