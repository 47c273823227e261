//! Post-session questionnaire aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Five-point questions, in report order.
pub const LIKERT_QUESTIONS: [&str; 5] = ["clarity", "proactivity", "ease_of_use", "satisfaction", "relevance"];

/// Categorical questions with a fixed choice list, so unpicked choices
/// still show up at 0%.
const CATEGORICAL_CHOICES: [(&str, &[&str]); 1] = [("ai_first_helpfulness", &["more", "same", "less"])];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub participant: String,
    pub likert: BTreeMap<String, u8>,
    pub categorical: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionSummary {
    pub question: String,
    pub n: usize,
    /// Mean score out of 5.
    pub mean: f64,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoricalSummary {
    pub question: String,
    pub n: usize,
    /// (choice, count, percentage of respondents).
    pub shares: Vec<(String, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveySummary {
    pub questions: Vec<QuestionSummary>,
    /// Mean of the per-question percentages.
    pub overall_percentage: f64,
    /// The overall percentage on the five-point scale.
    pub overall_mean: f64,
    pub categorical: Vec<CategoricalSummary>,
}

pub fn aggregate_survey(responses: &[SurveyResponse]) -> Result<SurveySummary, EvalError> {
    if responses.is_empty() {
        return Err(EvalError::EmptyGroup("no survey responses".into()));
    }
    let mut questions = Vec::new();
    for q in LIKERT_QUESTIONS {
        let vals: Vec<f64> = responses.iter().filter_map(|r| r.likert.get(q)).map(|v| *v as f64).collect();
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        questions.push(QuestionSummary {
            question: q.to_string(),
            n: vals.len(),
            mean,
            percentage: mean / 5.0 * 100.0,
        });
    }
    let overall_percentage = if questions.is_empty() {
        0.0
    } else {
        questions.iter().map(|q| q.percentage).sum::<f64>() / questions.len() as f64
    };

    let mut labels: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (q, choices) in CATEGORICAL_CHOICES {
        labels.insert(q, choices.iter().map(|c| c.to_string()).collect());
    }
    for r in responses {
        for (q, choice) in &r.categorical {
            let l = labels.entry(q.as_str()).or_default();
            if !l.contains(choice) {
                l.push(choice.clone());
            }
        }
    }
    let categorical = labels
        .into_iter()
        .filter_map(|(q, choices)| {
            let answers: Vec<&String> = responses.iter().filter_map(|r| r.categorical.get(q)).collect();
            if answers.is_empty() {
                return None;
            }
            let n = answers.len();
            let shares = choices
                .into_iter()
                .map(|c| {
                    let k = answers.iter().filter(|a| ***a == c).count();
                    (c, k, 100.0 * k as f64 / n as f64)
                })
                .collect();
            Some(CategoricalSummary {
                question: q.to_string(),
                n,
                shares,
            })
        })
        .collect();

    Ok(SurveySummary {
        questions,
        overall_percentage,
        overall_mean: overall_percentage / 100.0 * 5.0,
        categorical,
    })
}

#[derive(Debug, Deserialize)]
struct SurveyRow {
    participant: String,
    question: String,
    value: String,
}

/// Reads `participant,question,value` rows. Five-point questions must hold
/// an integer 1..=5; any other question is categorical.
pub fn load_survey_csv(path: impl AsRef<Path>) -> Result<Vec<SurveyResponse>, EvalError> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let parse_err = |detail: String| EvalError::Parse {
        file: file.clone(),
        detail,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let mut by_participant: BTreeMap<String, SurveyResponse> = BTreeMap::new();
    for (i, row) in reader.deserialize::<SurveyRow>().enumerate() {
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let entry = by_participant.entry(row.participant.clone()).or_insert_with(|| SurveyResponse {
            participant: row.participant.clone(),
            ..Default::default()
        });
        if LIKERT_QUESTIONS.contains(&row.question.as_str()) {
            let v: u8 = row
                .value
                .parse()
                .ok()
                .filter(|v| (1..=5).contains(v))
                .ok_or_else(|| parse_err(format!("row {}: `{}` is not a score from 1 to 5", i + 2, row.value)))?;
            entry.likert.insert(row.question, v);
        } else {
            entry.categorical.insert(row.question, row.value);
        }
    }
    Ok(by_participant.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Twelve respondents whose per-question score sums are 41, 38, 37, 36
    /// and 32, i.e. means 3.42, 3.17, 3.08, 3.00 and 2.67 after rounding.
    pub(crate) fn table2_responses() -> Vec<SurveyResponse> {
        let sums = [41u32, 38, 37, 36, 32];
        (0..12)
            .map(|p| {
                let likert = LIKERT_QUESTIONS
                    .iter()
                    .zip(sums)
                    .map(|(q, s)| {
                        // Spread the sum as evenly as possible over 12 people.
                        let base = s / 12;
                        let extra = (p as u32) < s % 12;
                        (q.to_string(), (base + extra as u32) as u8)
                    })
                    .collect();
                SurveyResponse {
                    participant: format!("p{p:02}"),
                    likert,
                    categorical: BTreeMap::new(),
                }
            })
            .collect()
    }

    #[test]
    fn table2_reproduction() {
        let s = aggregate_survey(&table2_responses()).unwrap();
        let got: Vec<(String, String)> = s
            .questions
            .iter()
            .map(|q| (format!("{:.2}", q.mean), format!("{:.2}", q.percentage)))
            .collect();
        let want = [
            ("3.42", "68.33"),
            ("3.17", "63.33"),
            ("3.08", "61.67"),
            ("3.00", "60.00"),
            ("2.67", "53.33"),
        ];
        for (g, w) in got.iter().zip(want) {
            assert_eq!((g.0.as_str(), g.1.as_str()), w);
        }
        assert_eq!(format!("{:.2}", s.overall_mean), "3.07");
        assert_eq!(format!("{:.2}", s.overall_percentage), "61.33");
    }

    #[test]
    fn all_fives() {
        let r = SurveyResponse {
            participant: "p".into(),
            likert: LIKERT_QUESTIONS.iter().map(|q| (q.to_string(), 5)).collect(),
            categorical: BTreeMap::new(),
        };
        let s = aggregate_survey(&[r]).unwrap();
        assert_eq!(s.overall_mean, 5.0);
        assert_eq!(s.overall_percentage, 100.0);
        assert!(aggregate_survey(&[]).is_err());
    }

    #[test]
    fn categorical_shares() {
        let responses: Vec<SurveyResponse> = (0..9)
            .map(|i| SurveyResponse {
                participant: format!("p{i}"),
                likert: BTreeMap::new(),
                categorical: [("ai_first_helpfulness".to_string(), if i < 7 { "more" } else { "same" }.to_string())]
                    .into(),
            })
            .collect();
        let s = aggregate_survey(&responses).unwrap();
        let c = &s.categorical[0];
        let shares: Vec<(String, String)> = c.shares.iter().map(|(l, _, p)| (l.clone(), format!("{p:.1}"))).collect();
        assert_eq!(
            shares,
            [("more".into(), "77.8".into()), ("same".into(), "22.2".into()), ("less".into(), "0.0".into())]
        );
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("survey.csv");
        std::fs::write(
            &path,
            "participant,question,value\np1,clarity,4\np1,ai_first_helpfulness,more\np2,clarity,2\n",
        )
        .unwrap();
        let r = load_survey_csv(&path).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].likert["clarity"], 4);
        assert_eq!(r[0].categorical["ai_first_helpfulness"], "more");
        std::fs::write(&path, "participant,question,value\np1,clarity,7\n").unwrap();
        assert!(matches!(load_survey_csv(&path), Err(EvalError::Parse { .. })));
    }

    proptest::proptest! {
        #[test]
        fn overall_is_mean_of_question_percentages(scores in proptest::collection::vec(proptest::collection::vec(1u8..=5, 5), 1..20)) {
            let responses: Vec<SurveyResponse> = scores.iter().enumerate().map(|(i, s)| SurveyResponse {
                participant: format!("p{i}"),
                likert: LIKERT_QUESTIONS.iter().zip(s).map(|(q, v)| (q.to_string(), *v)).collect(),
                categorical: BTreeMap::new(),
            }).collect();
            let s = aggregate_survey(&responses).unwrap();
            let mean: f64 = s.questions.iter().map(|q| q.percentage).sum::<f64>() / 5.0;
            proptest::prop_assert!((s.overall_percentage - mean).abs() < 0.01);
        }
    }
}
