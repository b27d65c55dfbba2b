use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::model::MarkMeasure;

/// Jump times in `(0, T]` with their marks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JumpSchedule {
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
}

impl JumpSchedule {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Draws a compound Poisson schedule: `K ~ Poisson(T·ν(U))`, sorted uniform
/// times on `(0, T]`, i.i.d. marks from `ν / ν(U)`.
pub fn sample_jump_schedule<R: Rng + ?Sized>(
    measure: &MarkMeasure,
    horizon: f64,
    rng: &mut R,
) -> JumpSchedule {
    let rate = measure.total_mass() * horizon;
    if rate <= 0.0 {
        return JumpSchedule::default();
    }
    let count = Poisson::new(rate)
        .expect("finite positive Poisson rate")
        .sample(rng) as usize;
    let mut times: Vec<f64> = (0..count)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .collect();
    times.sort_by(f64::total_cmp);
    let marks = (0..count).map(|_| measure.sample_mark(rng)).collect();
    JumpSchedule { times, marks }
}

/// Which random measure a jump belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpSource {
    /// compensated ν0 jumps
    Compensated,
    /// raw ν1 jumps
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: f64,
    pub source: JumpSource,
}

/// Both schedules merged in time order (ties: compensated first).
pub fn merge_events(jumps0: &JumpSchedule, jumps1: &JumpSchedule) -> Vec<JumpEvent> {
    fn tag(s: &JumpSchedule, source: JumpSource) -> impl Iterator<Item = JumpEvent> + '_ {
        s.times
            .iter()
            .zip(&s.marks)
            .map(move |(&time, &mark)| JumpEvent { time, mark, source })
    }
    let mut events: Vec<JumpEvent> = tag(jumps0, JumpSource::Compensated)
        .chain(tag(jumps1, JumpSource::Raw))
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_mass_gives_empty_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_jump_schedule(&MarkMeasure::none(), 1.0, &mut rng).is_empty());
    }

    #[test]
    fn counts_are_poisson_with_the_right_mean() {
        let m = MarkMeasure::discrete(vec![(1.0, 1.5), (-1.0, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut total = 0usize;
        let mut ups = 0usize;
        for _ in 0..n {
            let s = sample_jump_schedule(&m, 1.0, &mut rng);
            assert!(s.times.windows(2).all(|w| w[0] < w[1]));
            assert!(s.times.iter().all(|&t| t > 0.0 && t <= 1.0));
            total += s.len();
            ups += s.marks.iter().filter(|&&u| u == 1.0).count();
        }
        let mean = total as f64 / n as f64;
        let se = (2.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
        let freq = ups as f64 / total as f64;
        let se_f = (0.75 * 0.25 / total as f64).sqrt();
        assert!((freq - 0.75).abs() < 3.0 * se_f, "{freq}");
    }

    #[test]
    fn merge_orders_by_time() {
        let a = JumpSchedule { times: vec![0.1, 0.5], marks: vec![1.0, 2.0] };
        let b = JumpSchedule { times: vec![0.3], marks: vec![-1.0] };
        let ev = merge_events(&a, &b);
        let times: Vec<f64> = ev.iter().map(|e| e.time).collect();
        assert_eq!(times, vec![0.1, 0.3, 0.5]);
        assert_eq!(ev[1].source, JumpSource::Raw);
    }
}
