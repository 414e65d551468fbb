use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::world::{corrupt_transcript, random_transcript};
use super::{
    mode_key, AnnotatorOutcome, ModeTiming, PretagAccuracy, QaRoundSummary, RemovalEvent,
    SimAnnotatorParams, SimError, SimReport, SimScenario,
};
use crate::orchestrator::{
    Clock, JobRequest, ManualClock, Orchestrator, OrchestratorError, ServiceConfig, SlotAnswer,
    SubmitRequest, UnitSpec, UnitState, WorkUnit,
};
use crate::pretag::{gate_prelabels, GatingPolicy, PrelabelMode};
use crate::qc::{
    judge_answer, normalize_tokens, word_edit_distance, AnswerKind, Assignment, BehaviorEvent,
    JudgePolicy, QcError, TestQuestion, WorkItemPayload,
};

const SESSION: &str = "sim";

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What the audio at a path really says.
struct Clip {
    truth: String,
    is_tq: bool,
}

struct Pending {
    assignment: Assignment,
    answers: Vec<SlotAnswer>,
    events: Vec<BehaviorEvent>,
}

struct SimAnnotator {
    id: String,
    params: SimAnnotatorParams,
    rng: ChaCha8Rng,
    submitted: u64,
    removed: bool,
    retired: bool,
    pending: Option<Pending>,
}

/// One scenario run, kept around so tests can inspect the service state.
pub struct Simulation {
    scenario: SimScenario,
    clock: Arc<ManualClock>,
    orch: Orchestrator,
    job_id: String,
    clips: HashMap<String, Clip>,
    unit_truth: BTreeMap<String, String>,
    annotators: Vec<SimAnnotator>,
}

fn draw_accuracy(acc: PretagAccuracy, rng: &mut impl Rng) -> f64 {
    match acc {
        PretagAccuracy::Fixed { value } => value,
        PretagAccuracy::Uniform { low, high } if high > low => rng.gen_range(low..=high),
        PretagAccuracy::Uniform { low, .. } => low,
    }
}

impl Simulation {
    pub fn new(scenario: &SimScenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let clock = Arc::new(ManualClock::new(0));
        let orch = Orchestrator::ephemeral(
            ServiceConfig {
                seed: scenario.rng_seed,
                ..ServiceConfig::default()
            },
            clock.clone(),
        );
        let job = &scenario.job;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
        let gating = GatingPolicy::default();
        let mut clips = HashMap::new();
        let mut unit_truth = BTreeMap::new();
        let mut item = |i: usize, is_tq: bool, rng: &mut ChaCha8Rng| {
            let accuracy = draw_accuracy(scenario.pretag_accuracy, rng);
            let truth = random_transcript(rng);
            let prelabel = if rng.gen_bool(accuracy) {
                truth.clone()
            } else {
                corrupt_transcript(&truth, rng)
            };
            let mode = job
                .prelabel_mode
                .unwrap_or_else(|| gate_prelabels(accuracy, &gating));
            let audio_path = format!("/sim/clips/{i:06}.wav");
            clips.insert(
                audio_path.clone(),
                Clip {
                    truth: truth.clone(),
                    is_tq,
                },
            );
            let payload = WorkItemPayload {
                kind: AnswerKind::Transcription,
                audio_path,
                duration_seconds: job.clip_seconds,
                prelabel: (mode == PrelabelMode::Assisted).then_some(prelabel),
            };
            (payload, mode, truth)
        };
        let mut units = Vec::with_capacity(job.units);
        for i in 0..job.units {
            let (payload, mode, truth) = item(i, false, &mut rng);
            let unit_id = format!("u{i:05}");
            unit_truth.insert(unit_id.clone(), truth);
            units.push(UnitSpec {
                unit_id,
                session_id: SESSION.into(),
                payload,
                prelabel_mode: Some(mode),
                locale: None,
            });
        }
        let mut tq_pool = Vec::with_capacity(job.tq_pool_size);
        for j in 0..job.tq_pool_size {
            let (payload, _, truth) = item(job.units + j, true, &mut rng);
            tq_pool.push(TestQuestion {
                tq_id: format!("tq{j:05}"),
                payload,
                ground_truth: truth,
                verified_by: "sim-checker".into(),
            });
        }
        let mut annotators = Vec::new();
        for params in &scenario.population {
            for _ in 0..params.count {
                let n = annotators.len();
                let id = format!("ann{n:03}");
                orch.set_qualification(&id, &job.locale, true)?;
                annotators.push(SimAnnotator {
                    id,
                    params: params.clone(),
                    rng: ChaCha8Rng::seed_from_u64(mix(scenario.rng_seed ^ mix(n as u64 + 1))),
                    submitted: 0,
                    removed: false,
                    retired: false,
                    pending: None,
                });
            }
        }
        let job_id = orch.create_job(JobRequest {
            job_id: Some("simjob".into()),
            locale: job.locale.clone(),
            guideline_version: "sim".into(),
            policy: job.policy.clone(),
            tq_pool,
            sessions: Vec::new(),
            units,
        })?;
        Ok(Simulation {
            scenario: scenario.clone(),
            clock,
            orch,
            job_id,
            clips,
            unit_truth,
            annotators,
        })
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orch
    }

    pub fn job_id(&self) -> &str {
        &self.job_id
    }

    /// True transcript of every unit.
    pub fn truth(&self) -> &BTreeMap<String, String> {
        &self.unit_truth
    }

    fn judge(&self) -> JudgePolicy {
        self.scenario.job.policy.judge()
    }

    fn defect_rate(&self) -> Result<Option<f64>, SimError> {
        let answers = self.orch.transcripts(&self.job_id)?;
        if answers.is_empty() {
            return Ok(None);
        }
        let judge = self.judge();
        let bad = answers
            .iter()
            .filter(|(u, text)| {
                !judge_answer(
                    AnswerKind::Transcription,
                    text,
                    &self.unit_truth[*u],
                    &judge,
                )
            })
            .count();
        Ok(Some(bad as f64 / answers.len() as f64))
    }

    fn work(
        &mut self,
        i: usize,
        assignment: Assignment,
        timing: &mut BTreeMap<String, ModeTiming>,
    ) -> u64 {
        let ann = &mut self.annotators[i];
        let p = &ann.params;
        let mut answers = Vec::new();
        let mut events = Vec::new();
        let mut total_ms = 0u64;
        for slot in &assignment.items {
            let clip = &self.clips[&slot.payload.audio_path];
            let truth = &clip.truth;
            let prelabel = slot.payload.prelabel.as_deref();
            let assisted = prelabel.is_some();
            let primed = match prelabel {
                Some(pl) if pl != truth => ann.rng.gen_bool(p.priming_bias),
                _ => false,
            };
            let text = if primed {
                prelabel.unwrap_or_default().to_string()
            } else if ann.rng.gen_bool(p.base_accuracy) {
                truth.clone()
            } else {
                corrupt_transcript(truth, &mut ann.rng)
            };
            let coverage = if ann.rng.gen_bool(p.listen_discipline) {
                1.0
            } else {
                ann.rng.gen_range(0.3..0.95)
            };
            let seconds = if assisted {
                p.seconds_per_unit_scratch / p.assisted_speedup
            } else {
                p.seconds_per_unit_scratch
            };
            let ms = (seconds * 1000.0).round() as u64;
            total_ms += ms;
            let edit_count = match prelabel {
                Some(pl) => {
                    word_edit_distance(&normalize_tokens(pl), &normalize_tokens(&text)) as u64
                }
                None => text.split_whitespace().count() as u64,
            };
            if !clip.is_tq {
                let mode = if assisted {
                    PrelabelMode::Assisted
                } else {
                    PrelabelMode::FromScratch
                };
                let t = timing.entry(mode_key(mode).to_string()).or_default();
                t.slots += 1;
                t.total_seconds += seconds;
            }
            events.push(BehaviorEvent {
                assignment_id: assignment.assignment_id.clone(),
                slot_index: slot.slot_index,
                listen_coverage: coverage,
                edit_count,
                edit_time_ms: if edit_count > 0 { ms / 2 } else { 0 },
                dwell_time_ms: ms,
                audio_seconds: slot.payload.duration_seconds,
                mode: if assisted {
                    PrelabelMode::Assisted
                } else {
                    PrelabelMode::FromScratch
                },
            });
            answers.push(SlotAnswer {
                token: slot.token.clone(),
                text,
            });
        }
        ann.pending = Some(Pending {
            assignment,
            answers,
            events,
        });
        total_ms
    }

    /// Runs the scenario to completion and reports.
    pub fn run(&mut self) -> Result<SimReport, SimError> {
        let mut heap: BinaryHeap<Reverse<(u64, u64, usize)>> = BinaryHeap::new();
        let mut order = 0u64;
        let mut push = |heap: &mut BinaryHeap<Reverse<(u64, u64, usize)>>, t: u64, i: usize| {
            order += 1;
            heap.push(Reverse((t, order, i)));
        };
        for i in 0..self.annotators.len() {
            push(&mut heap, 0, i);
        }
        let mut idle: BTreeSet<usize> = BTreeSet::new();
        let mut timing: BTreeMap<String, ModeTiming> = BTreeMap::new();
        let mut removals = Vec::new();
        let mut qa_rounds = Vec::new();
        let mut first_pass = None;
        let mut lease_expiries = 0u64;
        let mut assignments = 0u64;
        let mut finalized = false;
        let mut all_accepted;
        let horizon = self.scenario.horizon as u64;

        loop {
            while let Some(Reverse((t, _, i))) = heap.pop() {
                self.clock.set_ms(t.max(self.clock.now_ms()));
                let now = self.clock.now_ms();
                if let Some(work) = self.annotators[i].pending.take() {
                    let req = SubmitRequest {
                        submission_id: None,
                        answers: work.answers,
                        events: work.events,
                        annotator_id: None,
                    };
                    match self.orch.submit(&work.assignment.assignment_id, req) {
                        Ok(out) => {
                            let ann = &mut self.annotators[i];
                            ann.submitted += 1;
                            if out.removed && !ann.removed {
                                ann.removed = true;
                                let profile = self.orch.read(|st| st.annotators[&ann.id].clone());
                                removals.push(RemovalEvent {
                                    annotator_id: ann.id.clone(),
                                    at_ms: now,
                                    assignments_submitted: ann.submitted,
                                    tq_attempted: profile.tq_attempted,
                                    quality_score: profile.quality_score,
                                });
                            }
                            if !out.rejected.is_empty() || !out.recycled_units.is_empty() {
                                for j in std::mem::take(&mut idle) {
                                    push(&mut heap, now, j);
                                }
                            }
                            if !self.annotators[i].removed {
                                push(&mut heap, now, i);
                            }
                        }
                        Err(OrchestratorError::LeaseExpired(_)) => {
                            lease_expiries += 1;
                            for j in std::mem::take(&mut idle) {
                                push(&mut heap, now, j);
                            }
                            push(&mut heap, now, i);
                        }
                        Err(e) => return Err(e.into()),
                    }
                    continue;
                }
                let ann = &self.annotators[i];
                if ann.removed || ann.retired {
                    continue;
                }
                if horizon > 0 && ann.submitted >= horizon {
                    self.annotators[i].retired = true;
                    continue;
                }
                match self.orch.next_assignment(&ann.id, &self.job_id) {
                    Ok(a) => {
                        assignments += 1;
                        let ms = self.work(i, a, &mut timing);
                        push(&mut heap, now + ms, i);
                    }
                    Err(OrchestratorError::NoWork(_)) => {
                        idle.insert(i);
                    }
                    Err(OrchestratorError::Qc(QcError::TqPoolExhausted(_))) => {
                        self.annotators[i].retired = true;
                    }
                    Err(OrchestratorError::AnnotatorRemoved(_)) => {
                        self.annotators[i].removed = true;
                    }
                    Err(e) => return Err(e.into()),
                }
            }

            all_accepted = self.orch.read(|st| {
                st.jobs[&self.job_id]
                    .unit_ids
                    .iter()
                    .all(|u| st.units[u].state == UnitState::Accepted)
            });
            if first_pass.is_none() && (all_accepted || !self.scenario.finalize) {
                first_pass = self.defect_rate()?;
            }
            if !all_accepted
                || !self.scenario.finalize
                || qa_rounds.len() >= self.scenario.max_qa_rounds
            {
                break;
            }
            let truth = &self.unit_truth;
            let judge = self.judge();
            let mut auditor = |unit: &WorkUnit, answer: &str| {
                truth
                    .get(&unit.unit_id)
                    .map(|t| judge_answer(unit.payload.kind, answer, t, &judge))
            };
            let report = self.orch.finalize_job(&self.job_id, &mut auditor)?;
            qa_rounds.push(QaRoundSummary {
                round: report.round,
                accepted: report.accepted(),
                audited: report.assessment.audited,
                pass_rate: report.assessment.pass_rate,
                wilson_lower: report.assessment.wilson_lower,
                requeued: report.requeued_ids.len(),
            });
            if report.accepted() {
                finalized = true;
                break;
            }
            idle.clear();
            let now = self.clock.now_ms();
            for i in 0..self.annotators.len() {
                let a = &self.annotators[i];
                if !a.removed && !a.retired {
                    push(&mut heap, now, i);
                }
            }
        }

        for t in timing.values_mut() {
            if t.slots > 0 {
                t.mean_seconds_per_unit = t.total_seconds / t.slots as f64;
                t.units_per_hour = 3600.0 / t.mean_seconds_per_unit;
            }
        }
        let (flags, annotators) = self.orch.read(|st| {
            let flags = st.jobs[&self.job_id].flags.clone();
            let outcomes = self
                .annotators
                .iter()
                .map(|a| {
                    let p = &st.annotators[&a.id];
                    AnnotatorOutcome {
                        annotator_id: a.id.clone(),
                        removed: !p.is_active(),
                        quality_score: p.quality_score,
                        tq_attempted: p.tq_attempted,
                        assignments_submitted: a.submitted,
                    }
                })
                .collect();
            (flags, outcomes)
        });
        Ok(SimReport {
            rng_seed: self.scenario.rng_seed,
            units: self.scenario.job.units,
            completed: all_accepted && (finalized || !self.scenario.finalize),
            finalized,
            removals,
            flags,
            first_pass_defect_rate: first_pass,
            final_defect_rate: self.defect_rate()?,
            timing,
            qa_rounds,
            annotators,
            assignments,
            lease_expiries,
            end_ms: self.clock.now_ms(),
        })
    }
}

/// Runs one scenario end to end.
pub fn run_scenario(scenario: &SimScenario) -> Result<SimReport, SimError> {
    Simulation::new(scenario)?.run()
}
