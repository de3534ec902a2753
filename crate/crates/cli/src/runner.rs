//! Parallel simulation runners. Replicates run on the rayon pool and are
//! folded in index order, so results do not depend on the thread count.

use basket_core::simulation::{EstimationStudy, IdentificationStudy};
use basket_core::{EstimationMetrics, IdentificationMetrics, Result, ScenarioSpec};
use rayon::prelude::*;

pub fn estimation(spec: &ScenarioSpec) -> Result<EstimationMetrics> {
    let study = EstimationStudy::new(spec)?;
    let reps: Vec<_> = (0..spec.replicates)
        .into_par_iter()
        .map(|i| study.replicate(i))
        .collect();
    let mut acc = study.accumulator();
    for r in &reps {
        acc.add(r);
    }
    Ok(acc.finish(&spec.label))
}

pub fn identification(spec: &ScenarioSpec) -> Result<IdentificationMetrics> {
    let study = IdentificationStudy::new(spec)?;
    let reps: Vec<_> = (0..spec.replicates)
        .into_par_iter()
        .map(|i| study.replicate(i))
        .collect();
    let mut acc = study.accumulator();
    for r in &reps {
        acc.add(r);
    }
    Ok(acc.finish(&spec.label, spec.strategy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use basket_core::{run_estimation_study, run_identification_study, Truth};

    fn spec() -> ScenarioSpec {
        let mut s = ScenarioSpec::new(
            "t",
            vec![20, 20, 10, 10],
            vec![0.1; 4],
            Truth::Rates(vec![0.1, 0.1, 0.3, 0.3]),
        );
        s.replicates = 40;
        s
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = spec();
        assert_eq!(estimation(&s).unwrap(), run_estimation_study(&s).unwrap());
        assert_eq!(
            identification(&s).unwrap(),
            run_identification_study(&s).unwrap()
        );
    }
}
