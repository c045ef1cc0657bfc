//! ASCII playback of a recorded trajectory.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use wayfinder_core::gridworld::{load_map_file, GridMap};
use wayfinder_core::planner::{ground_state, read_trajectory, replay, PlannerState, TrajectoryStep};

use crate::CliError;

pub fn run(trajectory: &Path, map: &Path, fov: usize) -> Result<(), CliError> {
    let world = load_map_file(map).map_err(|e| CliError::Data(e.to_string()))?;
    let file = File::open(trajectory).map_err(|e| CliError::Data(format!("{}: {e}", trajectory.display())))?;
    let steps = read_trajectory(BufReader::new(file)).map_err(|e| CliError::Data(e.to_string()))?;
    print!("{}", render(&world, &steps, fov)?);
    Ok(())
}

/// One frame per step as the listener saw it before acting, then the final
/// frame and a summary line.
pub fn render(world: &GridMap, steps: &[TrajectoryStep], fov: usize) -> Result<String, CliError> {
    let summary = replay(world, steps).map_err(|e| CliError::Data(e.to_string()))?;
    let dims = (world.width(), world.height());
    let mut state: Option<PlannerState> = None;
    let mut out = String::new();
    let see = |pos, taken, state: &mut Option<PlannerState>| -> Result<(), CliError> {
        let obs = world.observe_at(pos, fov, taken);
        *state = Some(ground_state(&obs, state.take(), dims).map_err(|e| CliError::Data(e.to_string()))?);
        Ok(())
    };
    for s in steps {
        see(s.position, s.step, &mut state)?;
        let action = s.action.map_or("(none)", |a| a.token());
        let mut notes = String::new();
        if s.blocked {
            notes.push_str(" [blocked]");
        }
        if s.replanned {
            notes.push_str(" [replanned]");
        }
        let _ = writeln!(out, "step {} at {} {action}{notes}", s.step, s.position);
        out.push_str(&state.as_ref().expect("observed").render());
        out.push('\n');
    }
    see(summary.final_position, steps.len(), &mut state)?;
    let _ = writeln!(out, "final at {}", summary.final_position);
    out.push_str(&state.as_ref().expect("observed").render());
    out.push('\n');
    let replans = steps.iter().filter(|s| s.replanned).count();
    let _ = writeln!(
        out,
        "S={} L={} blocked={} replanned_steps={replans}",
        u8::from(summary.success),
        summary.length,
        summary.blocked_steps
    );
    Ok(out)
}
