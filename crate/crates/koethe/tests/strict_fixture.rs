//! The committed two-stage strict parameter file: a fresh search under
//! the default seed must reproduce it byte for byte, so the expensive
//! search only ever needs to run once.

use koethe::persist::{parse_params, render_params, ParameterFile, StageRecord};
use koethe::sampler::SamplerConfig;
use koethe::stage::{extend_strict, SearchBudget};
use koethe::weights::WeightConfig;

const FIXTURE: &str = include_str!("fixtures/strict-two-stage.params");

#[test]
fn committed_strict_search_is_reproducible() {
    let stored = parse_params(FIXTURE).unwrap();
    let budget = SearchBudget::default();
    let sampler = SamplerConfig::default();
    let s0 = extend_strict(None, WeightConfig::default(), &budget, &sampler).unwrap();
    let s1 = extend_strict(Some(&s0.model), WeightConfig::default(), &budget, &sampler).unwrap();
    let fresh = ParameterFile {
        mode: koethe::operator::Mode::Strict,
        config: WeightConfig::default(),
        sampler,
        budget,
        stages: vec![
            StageRecord {
                spec: s1.model.specs()[0].clone(),
                report: koethe::stage::evaluate_conditions(&s1.model, 0, &SearchBudget::default())
                    .unwrap(),
                d_samples: s0.d.samples_used,
            },
            StageRecord {
                spec: s1.model.specs()[1].clone(),
                report: s1.report.clone(),
                d_samples: s1.d.samples_used,
            },
        ],
    };
    assert_eq!(render_params(&fresh).unwrap(), FIXTURE);
    assert_eq!(stored.assemble().unwrap(), s1.model);
    // Headline values of the committed search.
    let st = s1.model.stages();
    assert_eq!(st[0].a, 4u32.into());
    assert_eq!(st[0].d_exp, 3);
    assert_eq!(st[1].b, Some(3250u32.into()));
    assert_eq!(st[1].s, Some(6502u32.into()));
    assert_eq!(st[1].a, 84528u32.into());
    assert_eq!(st[1].pos_delta_next, 97535u32.into());
    assert_eq!(st[1].d_exp, 16);
}
