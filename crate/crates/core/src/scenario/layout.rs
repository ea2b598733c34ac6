//! Canonical deployment generators.
//!
//! AP placements follow fixed lattice rules (no randomness); users are drawn
//! from a stream that depends only on the seed, so the same seed gives the
//! same user positions across different AP counts.

use std::f64::consts::PI;

use rand::Rng;

use super::{
    snap_to_grid, ApNode, Point, Scenario, ScenarioClass, UtNode, WallSegment,
    DEFAULT_ANTENNAS, DEFAULT_GRID_STEP_M, DEFAULT_POWER_DB,
};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

pub const DEFAULT_WALL_ATTENUATION_DB: f64 = 5.0;

const HALL_SIDE_M: f64 = 20.0;
const FLOOR_LENGTH_M: f64 = 160.0;
const ROOM_DEPTH_M: f64 = 10.0;
const CORRIDOR_M: f64 = 3.0;
const OPEN_FLOOR_WIDTH_M: f64 = 2.0 * ROOM_DEPTH_M + CORRIDOR_M;
const STADIUM_SIDE_M: f64 = 200.0;
const STADIUM_FIELD_RADIUS_M: f64 = 40.0;
const STADIUM_OUTER_RADIUS_M: f64 = 100.0;

fn check_counts(n_aps: usize, n_users: usize) -> Result<()> {
    if n_aps == 0 || n_users == 0 {
        return Err(Error::InvalidParameter(format!(
            "need at least one AP and one user, got {n_aps} APs and {n_users} users"
        )));
    }
    Ok(())
}

fn make_aps(positions: Vec<Point>) -> Vec<ApNode> {
    positions
        .into_iter()
        .enumerate()
        .map(|(id, position)| ApNode {
            id,
            position,
            antennas: DEFAULT_ANTENNAS,
            power_db: DEFAULT_POWER_DB,
            sector: None,
        })
        .collect()
}

/// Users uniform over the grid points of the rectangle.
fn uniform_users(width: f64, height: f64, step: f64, n: usize, seed: u64) -> Vec<UtNode> {
    let nx = (width / step).floor() as u64;
    let ny = (height / step).floor() as u64;
    let mut rng = stream_rng(seed, streams::USER_PLACEMENT);
    (0..n)
        .map(|id| {
            let ix = rng.random_range(0..=nx);
            let iy = rng.random_range(0..=ny);
            UtNode { id, position: Point::new(ix as f64 * step, iy as f64 * step) }
        })
        .collect()
}

/// Splits `n` into consecutive row counts, earlier rows taking the extra one.
fn split_rows(n: usize, rows: usize) -> Vec<usize> {
    (0..rows).map(|r| n / rows + usize::from(r < n % rows)).collect()
}

/// One row of APs at the cell centres of an equal partition of `[0, length]`.
fn row_positions(count: usize, length: f64, y: f64, step: f64, width: f64, height: f64) -> Vec<Point> {
    (0..count)
        .map(|j| {
            let x = (j as f64 + 0.5) * length / count as f64;
            Point::new(snap_to_grid(x, step, width), snap_to_grid(y, step, height))
        })
        .collect()
}

/// 20 m x 20 m hall without walls.
///
/// APs sit on a near-square lattice: `cols = ceil(sqrt(n))`,
/// `rows = ceil(n / cols)`, every row full except possibly the last, each AP
/// at the centre of its lattice cell.
pub fn build_conference_hall(n_aps: usize, n_users: usize, seed: u64) -> Result<Scenario> {
    check_counts(n_aps, n_users)?;
    let step = DEFAULT_GRID_STEP_M;
    let cols = (n_aps as f64).sqrt().ceil() as usize;
    let rows = n_aps.div_ceil(cols);
    let mut positions = Vec::with_capacity(n_aps);
    for r in 0..rows {
        let count = if r + 1 == rows { n_aps - cols * (rows - 1) } else { cols };
        let y = (r as f64 + 0.5) * HALL_SIDE_M / rows as f64;
        positions.extend(row_positions(count, HALL_SIDE_M, y, step, HALL_SIDE_M, HALL_SIDE_M));
    }
    Ok(Scenario {
        scenario_class: ScenarioClass::ConferenceHall,
        width_m: HALL_SIDE_M,
        height_m: HALL_SIDE_M,
        grid_step_m: step,
        walls: vec![],
        aps: make_aps(positions),
        users: uniform_users(HALL_SIDE_M, HALL_SIDE_M, step, n_users, seed),
    })
}

/// Two AP rows at a quarter and three quarters of the floor width. With an
/// odd count the first row holds one AP more than the second.
fn two_row_aps(n_aps: usize, y_rows: [f64; 2], step: f64, width: f64, height: f64) -> Vec<Point> {
    split_rows(n_aps, 2)
        .into_iter()
        .zip(y_rows)
        .flat_map(|(count, y)| row_positions(count, FLOOR_LENGTH_M, y, step, width, height))
        .collect()
}

/// 160 m x 23 m open-plan floor, no walls, APs in two equally spaced rows.
pub fn build_open_floor(n_aps: usize, n_users: usize, seed: u64) -> Result<Scenario> {
    check_counts(n_aps, n_users)?;
    let step = DEFAULT_GRID_STEP_M;
    let (w, h) = (FLOOR_LENGTH_M, OPEN_FLOOR_WIDTH_M);
    let positions = two_row_aps(n_aps, [h / 4.0, 3.0 * h / 4.0], step, w, h);
    Ok(Scenario {
        scenario_class: ScenarioClass::OpenFloor,
        width_m: w,
        height_m: h,
        grid_step_m: step,
        walls: vec![],
        aps: make_aps(positions),
        users: uniform_users(w, h, step, n_users, seed),
    })
}

pub fn build_walled_office(n_rooms: usize, n_aps: usize, n_users: usize, seed: u64) -> Result<Scenario> {
    build_walled_office_with(n_rooms, n_aps, n_users, seed, DEFAULT_WALL_ATTENUATION_DB)
}

/// 160 m floor: a row of rooms (10 m deep), a 3 m corridor, another row.
///
/// Walls emitted: the two full-length corridor walls, then
/// `n_rooms / 2 - 1` partitions in each row. APs form two rows centred in
/// the room rows.
pub fn build_walled_office_with(
    n_rooms: usize,
    n_aps: usize,
    n_users: usize,
    seed: u64,
    wall_attenuation_db: f64,
) -> Result<Scenario> {
    check_counts(n_aps, n_users)?;
    if n_rooms < 2 || !n_rooms.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("room count must be even and at least 2, got {n_rooms}")));
    }
    let step = DEFAULT_GRID_STEP_M;
    let (w, h) = (FLOOR_LENGTH_M, OPEN_FLOOR_WIDTH_M);
    let lower = ROOM_DEPTH_M;
    let upper = ROOM_DEPTH_M + CORRIDOR_M;
    let wall = |a: Point, b: Point| WallSegment { a, b, attenuation_db: wall_attenuation_db };

    let mut walls = vec![
        wall(Point::new(0.0, lower), Point::new(w, lower)),
        wall(Point::new(0.0, upper), Point::new(w, upper)),
    ];
    let per_row = n_rooms / 2;
    let room_len = w / per_row as f64;
    for (y0, y1) in [(0.0, lower), (upper, h)] {
        for j in 1..per_row {
            let x = j as f64 * room_len;
            walls.push(wall(Point::new(x, y0), Point::new(x, y1)));
        }
    }

    let positions = two_row_aps(n_aps, [lower / 2.0, upper + (h - upper) / 2.0], step, w, h);
    Ok(Scenario {
        scenario_class: ScenarioClass::WalledOffice,
        width_m: w,
        height_m: h,
        grid_step_m: step,
        walls,
        aps: make_aps(positions),
        users: uniform_users(w, h, step, n_users, seed),
    })
}

/// Ring sizes for the stadium: ring `j` holds up to `4 (j + 1)` APs and the
/// outermost ring takes whatever remains.
fn stadium_rings(n_aps: usize) -> Vec<usize> {
    let mut rings = Vec::new();
    let mut left = n_aps;
    let mut j = 0;
    while left > 0 {
        let take = left.min(4 * (j + 1));
        rings.push(take);
        left -= take;
        j += 1;
    }
    rings
}

/// 200 m x 200 m footprint; seating annulus between 40 m and 100 m around
/// the centre. APs on concentric rings evenly spread across the annulus,
/// users uniform (by area) over the annulus.
pub fn build_stadium(n_aps: usize, n_users: usize, seed: u64) -> Result<Scenario> {
    check_counts(n_aps, n_users)?;
    let step = DEFAULT_GRID_STEP_M;
    let side = STADIUM_SIDE_M;
    let c = side / 2.0;
    let rings = stadium_rings(n_aps);
    let band = (STADIUM_OUTER_RADIUS_M - STADIUM_FIELD_RADIUS_M) / rings.len() as f64;
    let mut positions = Vec::with_capacity(n_aps);
    for (j, &count) in rings.iter().enumerate() {
        let radius = STADIUM_FIELD_RADIUS_M + (j as f64 + 0.5) * band;
        for i in 0..count {
            let theta = 2.0 * PI * (i as f64 + 0.5) / count as f64;
            positions.push(Point::new(
                snap_to_grid(c + radius * theta.cos(), step, side),
                snap_to_grid(c + radius * theta.sin(), step, side),
            ));
        }
    }

    let mut rng = stream_rng(seed, streams::USER_PLACEMENT);
    let (r2_in, r2_out) = (STADIUM_FIELD_RADIUS_M.powi(2), STADIUM_OUTER_RADIUS_M.powi(2));
    let users = (0..n_users)
        .map(|id| {
            let r = (r2_in + rng.random::<f64>() * (r2_out - r2_in)).sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            let position = Point::new(
                snap_to_grid(c + r * theta.cos(), step, side),
                snap_to_grid(c + r * theta.sin(), step, side),
            );
            UtNode { id, position }
        })
        .collect();

    Ok(Scenario {
        scenario_class: ScenarioClass::Stadium,
        width_m: side,
        height_m: side,
        grid_step_m: step,
        walls: vec![],
        aps: make_aps(positions),
        users,
    })
}
