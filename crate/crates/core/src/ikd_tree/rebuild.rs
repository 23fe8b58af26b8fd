use std::mem;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::geometry::Point3;

use super::node::{self, Link, Side};
use super::ops::{self, UpdateCtx};
use super::region::DeleteRegion;
use super::{BalanceParams, Shared, TreeStats};

/// An update recorded while the background thread rebuilds a subtree.
#[derive(Clone, Copy, Debug)]
pub(crate) enum LoggedOp {
    Insert(Point3),
    Delete(DeleteRegion),
}

pub(crate) fn spawn(shared: Arc<Shared>, path: Vec<Side>, params: BalanceParams) -> JoinHandle<()> {
    thread::Builder::new()
        .name("ikd-rebuild".into())
        .spawn(move || run(&shared, &path, &params))
        .expect("failed to spawn rebuild thread")
}

fn replay(subtree: &mut Link, ops: &[LoggedOp], params: &BalanceParams, stats: &mut TreeStats) {
    let mut ctx = UpdateCtx::new(params, false, None, stats);
    for op in ops {
        match op {
            LoggedOp::Insert(p) => ops::insert(subtree, *p, None, &mut ctx),
            LoggedOp::Delete(region) => {
                ops::box_delete(subtree, region, &mut ctx);
            }
        }
    }
}

fn run(shared: &Shared, path: &[Side], params: &BalanceParams) {
    // A read guard keeps the single writer out while queries proceed.
    let mut points = {
        let inner = shared.tree.read();
        shared.logger.lock().clear();
        let subtree = ops::subtree_at(&inner.root, path);
        let mut pts = Vec::with_capacity(node::size(subtree));
        node::flatten(subtree, &mut pts);
        pts
    };
    shared.wait_while_paused();

    let mut fresh = node::build(&mut points);
    drop(points);
    let mut stats = TreeStats::default();
    loop {
        let batch = mem::take(&mut *shared.logger.lock());
        if batch.is_empty() {
            break;
        }
        replay(&mut fresh, &batch, params, &mut stats);
    }

    let old = {
        let mut inner = shared.tree.write();
        let rest = mem::take(&mut *shared.logger.lock());
        replay(&mut fresh, &rest, params, &mut stats);
        let old = ops::replace_at(&mut inner.root, path, fresh);
        inner.in_flight = None;
        inner.stats.absorb(&stats);
        inner.stats.parallel_rebuilds_completed += 1;
        old
    };
    drop(old);
}
