//! Prompt assembly for the two generation stages.
//!
//! The first-stage prompt walks the model through the analysis outputs
//! (related methods, nearby logs, scope variables, in-project examples)
//! before showing the numbered target method. The second-stage prompt
//! feeds the tentative statement back together with type definitions for
//! the variables it used.

use crate::callgraph::CodeSlice;
use crate::corpus::Sample;
use crate::level::Level;
use crate::loggraph::LogSlice;
use crate::modelgw::{decompose_statement, GeneratedLog};
use crate::retrieval::StyleExample;
use crate::scopevars::{render_type_definition, render_variable_list, TypeDefinition, VariableEntry};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("unknown ablation flag: {0} (expected no-scope, no-style, or no-refine)")]
    UnknownAblation(String),
}

/// Which optional parts of the pipeline are switched off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablations {
    /// Drop the analysis-derived sections (related methods, nearby logs,
    /// variable list) from the prompt.
    pub no_scope: bool,
    /// Drop the retrieved in-project examples from the prompt.
    pub no_style: bool,
    /// Skip the second generation stage entirely (no prompt change).
    pub no_refine: bool,
}

impl Ablations {
    pub fn from_flags<S: AsRef<str>>(flags: &[S]) -> Result<Ablations, PromptError> {
        let mut ablations = Ablations::default();
        for flag in flags {
            match flag.as_ref() {
                "no-scope" => ablations.no_scope = true,
                "no-style" => ablations.no_style = true,
                "no-refine" => ablations.no_refine = true,
                other => return Err(PromptError::UnknownAblation(other.to_string())),
            }
        }
        Ok(ablations)
    }

    /// Active flags in canonical order, for report metadata.
    pub fn labels(&self) -> Vec<String> {
        let mut labels = Vec::new();
        if self.no_scope {
            labels.push("no-scope".to_string());
        }
        if self.no_style {
            labels.push("no-style".to_string());
        }
        if self.no_refine {
            labels.push("no-refine".to_string());
        }
        labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Instruction,
    CotSteps,
    StyleExamples,
    CodeSlice,
    LogSlice,
    VariableList,
    TargetMethod,
    OutputFormat,
    TentativeStatement,
    TypeDefinitions,
}

impl SectionKind {
    /// Stable header line for the rendered prompt; doubles as the marker
    /// tests and tooling use to find a section.
    pub fn header(self) -> &'static str {
        match self {
            SectionKind::Instruction => "### Task",
            SectionKind::CotSteps => "### Steps",
            SectionKind::StyleExamples => "### Logging examples from this project",
            SectionKind::CodeSlice => "### Related methods",
            SectionKind::LogSlice => "### Nearby logs",
            SectionKind::VariableList => "### Variables in scope",
            SectionKind::TargetMethod => "### Target method",
            SectionKind::OutputFormat => "### Answer format",
            SectionKind::TentativeStatement => "### Draft statement",
            SectionKind::TypeDefinitions => "### Type definitions",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub text: String,
}

/// An assembled prompt: the ordered sections it was built from, the flat
/// string sent to the model, and a rough size gauge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sections: Vec<Section>,
    pub rendered: String,
    /// Character count over four: coarse, but steady enough for budget
    /// warnings. Never used to truncate.
    pub token_estimate: usize,
}

impl PromptBundle {
    fn from_sections(sections: Vec<Section>) -> PromptBundle {
        let rendered = sections
            .iter()
            .map(|s| format!("{}\n{}\n", s.kind.header(), s.text.trim_end()))
            .collect::<Vec<_>>()
            .join("\n");
        let token_estimate = rendered.chars().count() / 4;
        PromptBundle {
            sections,
            rendered,
            token_estimate,
        }
    }

    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }
}

const GENERATION_INSTRUCTION: &str = "The Java method below is missing exactly one logging \
statement. Use the project context that follows to decide where the statement belongs and \
write the complete statement, matching how this project logs.";

const REFINEMENT_INSTRUCTION: &str = "You previously drafted the logging statement below for \
this Java method. Check every variable and method call in the draft against the type \
definitions that follow. Confirm the draft or correct it so that it only uses members that \
exist.";

const COT_STEPS: &str = "Work through these steps in order:\n\
1. Understand the method's role in the project from the related methods.\n\
2. Consider what is already logged before and after this method runs.\n\
3. Choose the line where the new statement belongs.\n\
4. Choose a severity level consistent with the examples.\n\
5. Choose variables only from the variable list.\n\
6. Write message text matching the project's wording and separators.";

const OUTPUT_FORMAT: &str = "Answer with exactly one line: the line number where the \
statement belongs, a single space, then the complete logging statement ending in a \
semicolon. Example:\n12 LOG.info(\"message\", variable);";

/// Numbers each line of the method, 1-based, matching how lines are
/// referenced in the answer format.
fn render_numbered_method(source: &str) -> String {
    source
        .lines()
        .enumerate()
        .map(|(i, line)| format!("{}: {}", i + 1, line))
        .collect::<Vec<_>>()
        .join("\n")
}

/// True for a line that holds a complete logging call at an on-scale
/// severity, used to highlight examples. Multi-line statements and
/// off-scale calls stay unmarked; the highlight is a reading aid, not a
/// grammar.
fn is_log_line(line: &str) -> bool {
    let trimmed = line.trim();
    if !trimmed.ends_with(';') {
        return false;
    }
    match decompose_statement(trimmed) {
        Ok(d) => d.level.is_some(),
        Err(_) => false,
    }
}

fn render_style_examples(examples: &[StyleExample]) -> String {
    if examples.is_empty() {
        return "(no examples available)".to_string();
    }
    examples
        .iter()
        .enumerate()
        .map(|(i, example)| {
            let highlighted = example
                .method_source_with_logs
                .lines()
                .map(|line| {
                    if is_log_line(line) {
                        format!("{line} // <LOG>")
                    } else {
                        line.to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join("\n");
            format!("Example {}:\n{}", i + 1, highlighted)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn or_placeholder(text: &str, placeholder: &str) -> String {
    if text.trim().is_empty() {
        placeholder.to_string()
    } else {
        text.to_string()
    }
}

/// Builds the first-stage prompt. Sections appear in a fixed order;
/// ablation flags remove their sections and touch nothing else.
pub fn build_contextualized_prompt(
    sample: &Sample,
    code_slice: &CodeSlice,
    log_slice: &LogSlice,
    variables: &[VariableEntry],
    examples: &[StyleExample],
    ablations: Ablations,
) -> PromptBundle {
    let mut sections = vec![
        Section {
            kind: SectionKind::Instruction,
            text: GENERATION_INSTRUCTION.to_string(),
        },
        Section {
            kind: SectionKind::CotSteps,
            text: COT_STEPS.to_string(),
        },
    ];
    if !ablations.no_style {
        sections.push(Section {
            kind: SectionKind::StyleExamples,
            text: render_style_examples(examples),
        });
    }
    if !ablations.no_scope {
        sections.push(Section {
            kind: SectionKind::CodeSlice,
            text: or_placeholder(&code_slice.rendered, "(no related methods resolved)"),
        });
        sections.push(Section {
            kind: SectionKind::LogSlice,
            text: or_placeholder(&log_slice.rendered, "(no nearby logs found)"),
        });
        sections.push(Section {
            kind: SectionKind::VariableList,
            text: or_placeholder(&render_variable_list(variables), "(no variables in scope)"),
        });
    }
    sections.push(Section {
        kind: SectionKind::TargetMethod,
        text: render_numbered_method(&sample.method_source),
    });
    sections.push(Section {
        kind: SectionKind::OutputFormat,
        text: OUTPUT_FORMAT.to_string(),
    });
    PromptBundle::from_sections(sections)
}

/// Builds the second-stage prompt around the tentative statement and the
/// definitions of the types its variables resolved to.
pub fn build_refinement_prompt(
    sample: &Sample,
    tentative: &GeneratedLog,
    type_defs: &[TypeDefinition],
) -> PromptBundle {
    let defs_text = if type_defs.is_empty() {
        "(no project-internal types resolved)".to_string()
    } else {
        type_defs
            .iter()
            .map(render_type_definition)
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    let sections = vec![
        Section {
            kind: SectionKind::Instruction,
            text: REFINEMENT_INSTRUCTION.to_string(),
        },
        Section {
            kind: SectionKind::TargetMethod,
            text: render_numbered_method(&sample.method_source),
        },
        Section {
            kind: SectionKind::TentativeStatement,
            text: format!("{} {}", tentative.line, tentative.statement),
        },
        Section {
            kind: SectionKind::TypeDefinitions,
            text: defs_text,
        },
        Section {
            kind: SectionKind::OutputFormat,
            text: OUTPUT_FORMAT.to_string(),
        },
    ];
    PromptBundle::from_sections(sections)
}

/// File name for a dumped prompt: the sample id with every path-hostile
/// character flattened to an underscore.
pub fn prompt_file_name(sample_id: &str, stage: crate::modelgw::Stage) -> String {
    let safe: String = sample_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.{stage}.prompt.txt")
}

/// Severity names the level-choice step may mention, exposed for tests
/// that check scale agreement.
pub fn level_scale_names() -> Vec<&'static str> {
    Level::ALL.iter().map(|l| l.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::modelgw::{ParsedGeneration, Stage};
    use crate::scopevars::{Attribute, MemberFunction, VarOrigin};

    fn sample() -> Sample {
        Sample {
            sample_id: "demo::d.Svc#run(int)@L3".to_string(),
            project: "demo".to_string(),
            method_id: "d.Svc#run(int)".to_string(),
            method_source: "void run(int n) {\n    int total = n;\n    finish(total);\n}\n"
                .to_string(),
            gt_line: 3,
            gt_statement: "LOG.info(\"running \" + n);".to_string(),
            gt_level: Level::Info,
            gt_variables: vec!["n".to_string()],
            gt_text: "running ".to_string(),
            split: Split::Test,
        }
    }

    fn code_slice() -> CodeSlice {
        CodeSlice {
            target: "d.Svc#run(int)".to_string(),
            chain: vec![],
            rendered: "d.Svc#run(int) invokes d.Svc#finish(int).".to_string(),
        }
    }

    fn log_slice() -> LogSlice {
        LogSlice {
            target: "d.Svc#run(int)".to_string(),
            preceding: vec![],
            succeeding: vec![],
            rendered: "A possible preceding log: starting".to_string(),
        }
    }

    fn variables() -> Vec<VariableEntry> {
        vec![VariableEntry {
            name: "n".to_string(),
            type_name: "int".to_string(),
            origin: VarOrigin::Param,
        }]
    }

    fn examples() -> Vec<StyleExample> {
        vec![StyleExample {
            sample_id: "demo::d.Svc#stop()@L2".to_string(),
            method_source_with_logs: "void stop() {\n    LOG.info(\"stopping\");\n    halt();\n}\n"
                .to_string(),
            score: 3.25,
        }]
    }

    fn full_bundle(ablations: Ablations) -> PromptBundle {
        build_contextualized_prompt(
            &sample(),
            &code_slice(),
            &log_slice(),
            &variables(),
            &examples(),
            ablations,
        )
    }

    fn kinds(bundle: &PromptBundle) -> Vec<SectionKind> {
        bundle.sections.iter().map(|s| s.kind).collect()
    }

    #[test]
    fn full_prompt_has_all_sections_in_canonical_order() {
        let bundle = full_bundle(Ablations::default());
        assert_eq!(
            kinds(&bundle),
            vec![
                SectionKind::Instruction,
                SectionKind::CotSteps,
                SectionKind::StyleExamples,
                SectionKind::CodeSlice,
                SectionKind::LogSlice,
                SectionKind::VariableList,
                SectionKind::TargetMethod,
                SectionKind::OutputFormat,
            ]
        );
        assert!(bundle.section(SectionKind::TentativeStatement).is_none());
        assert!(bundle.section(SectionKind::TypeDefinitions).is_none());
    }

    #[test]
    fn ablations_remove_exactly_their_sections() {
        let no_style = full_bundle(Ablations {
            no_style: true,
            ..Ablations::default()
        });
        assert_eq!(
            kinds(&no_style),
            vec![
                SectionKind::Instruction,
                SectionKind::CotSteps,
                SectionKind::CodeSlice,
                SectionKind::LogSlice,
                SectionKind::VariableList,
                SectionKind::TargetMethod,
                SectionKind::OutputFormat,
            ]
        );

        let no_scope = full_bundle(Ablations {
            no_scope: true,
            ..Ablations::default()
        });
        assert_eq!(
            kinds(&no_scope),
            vec![
                SectionKind::Instruction,
                SectionKind::CotSteps,
                SectionKind::StyleExamples,
                SectionKind::TargetMethod,
                SectionKind::OutputFormat,
            ]
        );
    }

    #[test]
    fn output_format_survives_every_ablation_combination() {
        for bits in 0..8u8 {
            let ablations = Ablations {
                no_scope: bits & 1 != 0,
                no_style: bits & 2 != 0,
                no_refine: bits & 4 != 0,
            };
            let bundle = full_bundle(ablations);
            assert!(bundle.section(SectionKind::OutputFormat).is_some());
            assert!(bundle.section(SectionKind::TargetMethod).is_some());
            assert!(bundle.rendered.contains("### Answer format"));
        }
    }

    #[test]
    fn target_method_lines_are_numbered_one_based() {
        let bundle = full_bundle(Ablations::default());
        let section = bundle.section(SectionKind::TargetMethod).unwrap();
        let sample = sample();
        let source_lines: Vec<&str> = sample.method_source.lines().collect();
        let numbered: Vec<&str> = section.text.lines().collect();
        assert_eq!(numbered.len(), source_lines.len());
        for (i, line) in numbered.iter().enumerate() {
            assert!(
                line.starts_with(&format!("{}: ", i + 1)),
                "line {i} not numbered: {line}"
            );
            assert!(line.ends_with(source_lines[i]));
        }
    }

    #[test]
    fn style_examples_highlight_log_lines_only() {
        let bundle = full_bundle(Ablations::default());
        let text = &bundle.section(SectionKind::StyleExamples).unwrap().text;
        assert!(text.contains("LOG.info(\"stopping\"); // <LOG>"));
        assert!(text.contains("halt();"));
        assert!(!text.contains("halt(); // <LOG>"));
        assert!(text.starts_with("Example 1:"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = full_bundle(Ablations::default());
        let b = full_bundle(Ablations::default());
        assert_eq!(a.rendered, b.rendered);
        assert_eq!(a.token_estimate, b.token_estimate);
        assert_eq!(a.token_estimate, a.rendered.chars().count() / 4);
    }

    fn tentative() -> GeneratedLog {
        let parsed = ParsedGeneration {
            line: 3,
            statement: "LOG.info(\"running \" + svc.getState());".to_string(),
        };
        GeneratedLog::from_parsed("demo::d.Svc#run(int)@L3", Stage::Tentative, &parsed)
    }

    fn service_def() -> TypeDefinition {
        TypeDefinition {
            type_name: "Service".to_string(),
            member_functions: vec![
                MemberFunction {
                    name: "getServiceState".to_string(),
                    params: vec![],
                    return_type: "STATE".to_string(),
                },
                MemberFunction {
                    name: "getName".to_string(),
                    params: vec![],
                    return_type: "String".to_string(),
                },
            ],
            attributes: vec![Attribute {
                name: "state".to_string(),
                type_name: "STATE".to_string(),
            }],
            supertypes: vec![],
        }
    }

    #[test]
    fn refinement_prompt_carries_draft_and_definitions() {
        let bundle = build_refinement_prompt(&sample(), &tentative(), &[service_def()]);
        assert_eq!(
            kinds(&bundle),
            vec![
                SectionKind::Instruction,
                SectionKind::TargetMethod,
                SectionKind::TentativeStatement,
                SectionKind::TypeDefinitions,
                SectionKind::OutputFormat,
            ]
        );
        let draft = &bundle.section(SectionKind::TentativeStatement).unwrap().text;
        assert_eq!(draft, "3 LOG.info(\"running \" + svc.getState());");
        let defs = &bundle.section(SectionKind::TypeDefinitions).unwrap().text;
        assert!(defs.contains("getServiceState"));
        assert!(defs.contains("getName"));
    }

    #[test]
    fn refinement_prompt_states_when_no_types_resolved() {
        let bundle = build_refinement_prompt(&sample(), &tentative(), &[]);
        let defs = &bundle.section(SectionKind::TypeDefinitions).unwrap().text;
        assert_eq!(defs, "(no project-internal types resolved)");
    }

    #[test]
    fn empty_context_sections_render_placeholders() {
        let empty_code = CodeSlice {
            target: "t".to_string(),
            chain: vec![],
            rendered: String::new(),
        };
        let empty_logs = LogSlice {
            target: "t".to_string(),
            preceding: vec![],
            succeeding: vec![],
            rendered: String::new(),
        };
        let bundle = build_contextualized_prompt(
            &sample(),
            &empty_code,
            &empty_logs,
            &[],
            &[],
            Ablations::default(),
        );
        assert_eq!(
            bundle.section(SectionKind::CodeSlice).unwrap().text,
            "(no related methods resolved)"
        );
        assert_eq!(
            bundle.section(SectionKind::LogSlice).unwrap().text,
            "(no nearby logs found)"
        );
        assert_eq!(
            bundle.section(SectionKind::VariableList).unwrap().text,
            "(no variables in scope)"
        );
        assert_eq!(
            bundle.section(SectionKind::StyleExamples).unwrap().text,
            "(no examples available)"
        );
    }

    #[test]
    fn prompt_file_names_are_path_safe() {
        let name = prompt_file_name("demo::d.Svc#run(int)@L3", Stage::Tentative);
        assert_eq!(name, "demo__d.Svc_run_int__L3.tentative.prompt.txt");
        assert!(!name.contains(['/', ':', '#', '(', ')']));
    }

    #[test]
    fn ablation_flags_parse_and_round_trip() {
        let ablations = Ablations::from_flags(&["no-style", "no-refine"]).unwrap();
        assert!(ablations.no_style && ablations.no_refine && !ablations.no_scope);
        assert_eq!(ablations.labels(), vec!["no-style", "no-refine"]);
        assert!(Ablations::from_flags(&["no-logs"]).is_err());
        assert_eq!(Ablations::from_flags::<&str>(&[]).unwrap(), Ablations::default());
    }
}
