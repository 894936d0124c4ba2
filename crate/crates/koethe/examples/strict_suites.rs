//! Builds the two-stage strict model and runs every verification suite,
//! printing one summary line per suite.
//!
//! ```sh
//! cargo run --release --example strict_suites
//! ```

use koethe::sampler::SamplerConfig;
use koethe::stage::{extend_strict, SearchBudget};
use koethe::suites::{run_all, SuiteRanges};
use koethe::weights::WeightConfig;

fn main() {
    let budget = SearchBudget::default();
    let sampler = SamplerConfig::default();
    let stage0 = extend_strict(None, WeightConfig::default(), &budget, &sampler)
        .expect("stage 0 search");
    let stage1 = extend_strict(Some(&stage0.model), WeightConfig::default(), &budget, &sampler)
        .expect("stage 1 search");
    let model = stage1.model;

    let last = model.stages().last().unwrap();
    println!(
        "strict model: {} stages, rank horizon {}, D0 = 2^{}, D1 = 2^{}",
        model.stages().len(),
        last.pos_delta_next,
        model.stages()[0].d_exp,
        last.d_exp,
    );

    let mut all_ok = true;
    for report in run_all(&model, &SuiteRanges::default()).expect("suites run") {
        let (pass, fail, xfail) = report.counts();
        println!(
            "{:<10} pass={pass:<3} fail={fail:<3} xfail={xfail:<3} instances={}",
            report.suite.key(),
            report.volume
        );
        all_ok &= report.passed();
    }
    std::process::exit(if all_ok { 0 } else { 1 });
}
