use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use boardpush::config::RunConfig;
use boardpush::env::TrajectoryFrame;
use boardpush::learn::{self, Checkpoint, EvalReport, Task, TrainOptions, RUN_FILE};
use boardpush::model::{build_robot_tree, build_skateboard_tree, JointKind, ModelParams};
use boardpush::rewards::{RewardConfig, TERM_NAMES};
use boardpush::{Error, Result};

use crate::plot::{line_plot, Series};

pub const THREADS_VAR: &str = "BOARDPUSH_THREADS";

/// Worker count from `BOARDPUSH_THREADS`, else the available cores.
fn worker_threads() -> Result<usize> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| Error::Config {
                field: THREADS_VAR.into(),
                reason: format!("expected a positive integer, got `{v}`"),
            })?;
            if n == 0 {
                return Err(Error::Config {
                    field: THREADS_VAR.into(),
                    reason: "must be at least 1".into(),
                });
            }
            Ok(n)
        }
        Err(_) => Ok(cores),
    }
}

pub fn model_check(file: &Path) -> Result<()> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::Config {
        field: "model".into(),
        reason: format!("cannot read {}: {e}", file.display()),
    })?;
    let params = ModelParams::from_json_str(&text)?;
    let robot = build_robot_tree(&params)?;
    let board = build_skateboard_tree(&params)?;
    for tree in [&robot, &board] {
        println!(
            "{}: {} bodies, {} revolute joints ({} actuated), mass {:.3} kg",
            tree.name,
            tree.bodies.len(),
            tree.count_kind(JointKind::Revolute),
            tree.actuated_joints().count(),
            tree.total_mass()
        );
    }
    println!("ok");
    Ok(())
}

fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let mut run = RunConfig::load(path)?;
    for o in overrides {
        run.apply_override(o)?;
    }
    run.validate()?;
    Ok(run)
}

pub fn train(config: &Path, overrides: &[String], out: &Path, resume: Option<&Path>) -> Result<()> {
    let run = load_config(config, overrides)?;
    let threads = worker_threads()?;
    let summary = learn::train(
        &run,
        &TrainOptions {
            out_dir: out.to_path_buf(),
            threads,
            resume: resume.map(Path::to_path_buf),
        },
    )?;
    if let Some(m) = summary.metrics.last() {
        let ret = m.mean_return.map_or("n/a".to_string(), |r| format!("{r:.3}"));
        println!("update {} steps {} mean return {}", m.update, m.env_steps, ret);
    }
    println!(
        "finished {} updates, {} environment steps; checkpoint {}",
        summary.updates,
        summary.env_steps,
        summary.final_checkpoint.display()
    );
    Ok(())
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub config: Option<&'a Path>,
    pub overrides: &'a [String],
    pub episodes: usize,
    pub command: f64,
    pub seed: u64,
    pub out: &'a Path,
}

/// One trajectory line: a frame tagged with its episode.
#[derive(Debug, Serialize, Deserialize)]
pub struct Record {
    pub episode: usize,
    #[serde(flatten)]
    pub frame: TrajectoryFrame,
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    checkpoint: String,
    seed: u64,
    #[serde(flatten)]
    report: &'a EvalReport,
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(a.checkpoint)?;
    if ck.task != Task::Skate {
        return Err(Error::Architecture(
            "evaluation needs a checkpoint trained on the skate task".into(),
        ));
    }
    let beside = a.checkpoint.parent().map(|d| d.join(RUN_FILE));
    let run = match (a.config, beside) {
        (Some(p), _) => load_config(p, a.overrides)?,
        (None, Some(p)) if p.exists() => load_config(&p, a.overrides)?,
        _ => {
            let mut run = RunConfig::default();
            for o in a.overrides {
                run.apply_override(o)?;
            }
            run.validate()?;
            run
        }
    };
    std::fs::create_dir_all(a.out)?;
    let mut jsonl = BufWriter::new(File::create(a.out.join("trajectory.jsonl"))?);
    let mut csv = BufWriter::new(File::create(a.out.join("trajectory.csv"))?);
    let mut header_written = false;
    println!("command v_x = {} m/s, episodes = {}", a.command, a.episodes);
    let report = learn::evaluate(&run, &ck.policy, a.episodes, a.command, a.seed, |ep, frame| {
        if !header_written {
            writeln!(csv, "{}", frame.csv_header())?;
            header_written = true;
        }
        writeln!(csv, "{}", frame.csv_row())?;
        serde_json::to_writer(
            &mut jsonl,
            &Record {
                episode: ep,
                frame: frame.clone(),
            },
        )?;
        jsonl.write_all(b"\n")?;
        Ok(())
    })?;
    jsonl.flush()?;
    csv.flush()?;
    let file = ReportFile {
        checkpoint: a.checkpoint.display().to_string(),
        seed: a.seed,
        report: &report,
    };
    std::fs::write(a.out.join("report.json"), serde_json::to_string_pretty(&file)?)?;
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!("mean tracking error  {}", show(report.mean_tracking_error));
    println!("mean episode length  {}", show(report.mean_episode_length));
    println!("phase adherence      {}", show(report.phase_adherence));
    println!("foot slip rms        {}", show(report.foot_slip_rms));
    Ok(())
}

/// Reads a trajectory file, naming the first malformed line.
pub fn read_trajectory(path: &Path) -> Result<Vec<Record>> {
    let f = File::open(path).map_err(|e| Error::Config {
        field: "trajectory".into(),
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Trajectory {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Left foot carries more than the contact-reward force threshold.
fn left_on_ground(frame: &TrajectoryFrame) -> bool {
    frame.signals.foot_force[0] > RewardConfig::default().f_min
}

pub fn replay(trajectory: &Path, out: &Path) -> Result<()> {
    let records = read_trajectory(trajectory)?;
    if records.is_empty() {
        eprintln!("warning: {} holds no frames; plots will be empty", trajectory.display());
    }
    std::fs::create_dir_all(out)?;

    // A continuous time axis across episodes.
    let mut time = Vec::with_capacity(records.len());
    let mut offset = 0.0;
    let mut last_t = 0.0;
    let mut last_ep = None;
    for r in &records {
        if last_ep.is_some() && last_ep != Some(r.episode) {
            offset += last_t;
        }
        last_ep = Some(r.episode);
        last_t = r.frame.t;
        time.push(offset + r.frame.t);
    }
    let series = |name: &str, f: &dyn Fn(&TrajectoryFrame) -> Option<f64>| Series {
        name: name.to_string(),
        points: time
            .iter()
            .zip(&records)
            .filter_map(|(t, r)| f(&r.frame).map(|y| (*t, y)))
            .collect(),
    };

    let files: [(PathBuf, &str, &str, Vec<Series>); 3] = [
        (
            out.join("deck_velocity.svg"),
            "Deck forward velocity",
            "m/s",
            vec![
                series("deck v_x", &|f| Some(f.v_board[0])),
                series("command", &|f| Some(f.command.v_x)),
            ],
        ),
        (
            out.join("reward_terms.svg"),
            "Reward terms",
            "value",
            TERM_NAMES
                .iter()
                .enumerate()
                .filter(|(_, n)| **n != "torque")
                .map(|(k, n)| series(n, &move |f| f.reward.map(|r| r.terms[k])))
                .chain(std::iter::once(series("total", &|f| f.reward.map(|r| r.total))))
                .collect(),
        ),
        (
            out.join("phase_contact.svg"),
            "Left foot: expected vs actual contact",
            "contact",
            vec![
                series("expected", &|f| Some(f.expected_contact[0])),
                series("actual", &|f| Some(if left_on_ground(f) { 1.0 } else { 0.0 })),
            ],
        ),
    ];
    for (path, title, y_label, s) in &files {
        line_plot(path, title, y_label, s)?;
    }

    let mut csv = BufWriter::new(File::create(out.join("summary.csv"))?);
    writeln!(
        csv,
        "episode,steps,duration,command_vx,mean_deck_vx,mean_tracking_error,return,phase_adherence,termination"
    )?;
    let mut start = 0;
    while start < records.len() {
        let ep = records[start].episode;
        let end = start + records[start..].iter().take_while(|r| r.episode == ep).count();
        let frames: Vec<&TrajectoryFrame> = records[start..end].iter().map(|r| &r.frame).collect();
        let stepped: Vec<&&TrajectoryFrame> = frames.iter().filter(|f| f.reward.is_some()).collect();
        let n = stepped.len().max(1) as f64;
        let cmd = frames[0].command.v_x;
        let mean_vx = stepped.iter().map(|f| f.v_board[0]).sum::<f64>() / n;
        let track = stepped.iter().map(|f| (f.v_board[0] - cmd).abs()).sum::<f64>() / n;
        let ret = stepped.iter().filter_map(|f| f.reward.map(|r| r.total)).sum::<f64>();
        let adhere = stepped
            .iter()
            .filter(|f| left_on_ground(f) == (f.expected_contact[0] >= 0.5))
            .count() as f64
            / n;
        let term = frames.last().and_then(|f| f.termination).map_or("", |t| t.as_str());
        writeln!(
            csv,
            "{ep},{},{},{cmd},{mean_vx},{track},{ret},{adhere},{term}",
            stepped.len(),
            frames.last().map_or(0.0, |f| f.t)
        )?;
        start = end;
    }
    csv.flush()?;
    println!("wrote 3 plots and summary.csv to {}", out.display());
    Ok(())
}
