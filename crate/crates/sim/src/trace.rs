//! CSV export of simulation traces.

use std::io::Write;

use crate::contact::{contact_model, Terrain, NC};
use crate::model::{RobotModel, NQ};
use crate::state::{com_state, dcm, SimState};
use crate::SimError;

pub struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Result<Self, SimError> {
        let mut out = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..NQ).map(|i| format!("q{i}")));
        header.extend((0..NQ).map(|i| format!("qd{i}")));
        header.extend(["com_x", "com_z", "com_vx", "com_vz", "dcm_x", "dcm_z"].map(String::from));
        for k in ["lheel", "ltoe", "rheel", "rtoe"] {
            header.push(format!("{k}_fn"));
            header.push(format!("{k}_ft"));
        }
        out.write_record(&header)?;
        Ok(Self { out })
    }

    pub fn record(&mut self, model: &RobotModel, terrain: &Terrain, state: &SimState) -> Result<(), SimError> {
        let (x, v) = com_state(model, state);
        let xi = dcm(model, state);
        let contacts = contact_model(model, &state.q, &state.qd, terrain);
        let mut row = Vec::with_capacity(1 + 2 * NQ + 6 + 2 * NC);
        row.push(state.t);
        row.extend(state.q.iter());
        row.extend(state.qd.iter());
        row.extend([x[0], x[1], v[0], v[1], xi[0], xi[1]]);
        for c in &contacts {
            row.push(c.normal);
            row.push(c.tangential);
        }
        self.out.write_record(row.iter().map(|v| format!("{v:.9e}")))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), SimError> {
        self.out.flush().map_err(|e| SimError::Io(e.to_string()))
    }
}
