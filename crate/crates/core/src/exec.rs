//! Minimal threading machinery with fully deterministic semantics: a shared
//! output volume written through geometrically disjoint indices, an
//! atomic-claim task pool, and a dependency-graph executor with a priority
//! ready queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::marker::PhantomData;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::{Condvar, Mutex};

/// A raw view of the output volume that allows concurrent `+=` from several
/// workers.
///
/// Safety contract: during any window in which handles are used from more
/// than one thread, the sets of linear indices touched by different threads
/// must be disjoint. The parallel algorithms uphold this geometrically
/// (disjoint subdomain ranges, or buckets separated by more than the scatter
/// radius) and the acceptance suite checks the write-set disjointness
/// exhaustively on small grids.
pub(crate) struct SharedVolume<'a> {
    ptr: *mut f64,
    len: usize,
    _marker: PhantomData<&'a mut [f64]>,
}

unsafe impl Send for SharedVolume<'_> {}
unsafe impl Sync for SharedVolume<'_> {}

impl<'a> SharedVolume<'a> {
    pub fn new(values: &'a mut [f64]) -> Self {
        SharedVolume { ptr: values.as_mut_ptr(), len: values.len(), _marker: PhantomData }
    }

    /// # Safety
    /// `idx < len`, and no other thread touches `idx` concurrently.
    #[inline(always)]
    pub unsafe fn add(&self, idx: usize, v: f64) {
        debug_assert!(idx < self.len);
        *self.ptr.add(idx) += v;
    }
}

/// Runs `task` for every index in `0..num_tasks` on `threads` workers, each
/// worker claiming the next unstarted index. Claim order follows the index
/// order, so pre-sorting the task list implements priority.
pub(crate) fn pooled_for_each<F>(threads: usize, num_tasks: usize, task: F)
where
    F: Fn(usize) + Sync,
{
    let threads = threads.max(1).min(num_tasks.max(1));
    if num_tasks == 0 {
        return;
    }
    if threads == 1 {
        for i in 0..num_tasks {
            task(i);
        }
        return;
    }
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                if i >= num_tasks {
                    break;
                }
                task(i);
            });
        }
    });
}

/// Ready-queue entry: heavier tasks first, ties broken by ascending task
/// index then unit index.
#[derive(PartialEq)]
struct UnitEntry {
    weight: f64,
    task: usize,
    unit: usize,
}

impl Eq for UnitEntry {}

impl Ord for UnitEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // weights are finite and non-negative
        self.weight
            .partial_cmp(&other.weight)
            .unwrap()
            .then_with(|| other.task.cmp(&self.task))
            .then_with(|| other.unit.cmp(&self.unit))
    }
}

impl PartialOrd for UnitEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// What the DAG executor needs from a task set. A task expands into
/// `unit_count` independent units; once all units of a task finish,
/// `finish_task` runs exactly once (on the worker that completed the last
/// unit) before the task's successors are released.
pub(crate) trait DagTasks: Sync {
    fn num_tasks(&self) -> usize;
    fn successors(&self, task: usize) -> &[usize];
    fn predecessor_count(&self, task: usize) -> usize;
    /// Claim priority; heavier first.
    fn weight(&self, task: usize) -> f64;
    fn unit_count(&self, task: usize) -> usize;
    fn run_unit(&self, task: usize, unit: usize);
    fn finish_task(&self, task: usize);
}

struct DagState {
    ready: BinaryHeap<UnitEntry>,
    tasks_left: usize,
}

/// Executes a task DAG on `threads` workers: a task becomes ready when all
/// its predecessors have finished; idle workers claim ready units heaviest
/// first.
pub(crate) fn run_dag<T: DagTasks>(threads: usize, tasks: &T) {
    let n = tasks.num_tasks();
    if n == 0 {
        return;
    }
    let preds: Vec<AtomicUsize> =
        (0..n).map(|t| AtomicUsize::new(tasks.predecessor_count(t))).collect();
    let units_left: Vec<AtomicUsize> =
        (0..n).map(|t| AtomicUsize::new(tasks.unit_count(t).max(1))).collect();

    let mut initial = BinaryHeap::new();
    for t in 0..n {
        if preds[t].load(AtomicOrdering::Relaxed) == 0 {
            for u in 0..tasks.unit_count(t).max(1) {
                initial.push(UnitEntry { weight: tasks.weight(t), task: t, unit: u });
            }
        }
    }
    let state = Mutex::new(DagState { ready: initial, tasks_left: n });
    let cv = Condvar::new();

    let worker = || {
        loop {
            let entry = {
                let mut guard = state.lock().unwrap();
                loop {
                    if let Some(e) = guard.ready.pop() {
                        break e;
                    }
                    if guard.tasks_left == 0 {
                        return;
                    }
                    guard = cv.wait(guard).unwrap();
                }
            };
            if entry.unit < tasks.unit_count(entry.task) {
                tasks.run_unit(entry.task, entry.unit);
            }
            if units_left[entry.task].fetch_sub(1, AtomicOrdering::AcqRel) == 1 {
                tasks.finish_task(entry.task);
                let mut guard = state.lock().unwrap();
                guard.tasks_left -= 1;
                for &s in tasks.successors(entry.task) {
                    if preds[s].fetch_sub(1, AtomicOrdering::AcqRel) == 1 {
                        for u in 0..tasks.unit_count(s).max(1) {
                            guard.ready.push(UnitEntry {
                                weight: tasks.weight(s),
                                task: s,
                                unit: u,
                            });
                        }
                    }
                }
                drop(guard);
                cv.notify_all();
            }
        }
    };

    let threads = threads.max(1);
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(worker);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU64;

    #[test]
    fn pool_visits_every_task_once() {
        let hits: Vec<AtomicU64> = (0..100).map(|_| AtomicU64::new(0)).collect();
        pooled_for_each(4, 100, |i| {
            hits[i].fetch_add(1, AtomicOrdering::Relaxed);
        });
        assert!(hits.iter().all(|h| h.load(AtomicOrdering::Relaxed) == 1));
    }

    struct Chain {
        order: Mutex<Vec<usize>>,
        succs: Vec<Vec<usize>>,
        preds: Vec<usize>,
        weights: Vec<f64>,
    }

    impl DagTasks for Chain {
        fn num_tasks(&self) -> usize {
            self.preds.len()
        }
        fn successors(&self, task: usize) -> &[usize] {
            &self.succs[task]
        }
        fn predecessor_count(&self, task: usize) -> usize {
            self.preds[task]
        }
        fn weight(&self, task: usize) -> f64 {
            self.weights[task]
        }
        fn unit_count(&self, _task: usize) -> usize {
            1
        }
        fn run_unit(&self, task: usize, _unit: usize) {
            self.order.lock().unwrap().push(task);
        }
        fn finish_task(&self, _task: usize) {}
    }

    #[test]
    fn dag_respects_dependencies() {
        // 0 → 1 → 2 plus an independent 3; run with several threads.
        let chain = Chain {
            order: Mutex::new(Vec::new()),
            succs: vec![vec![1], vec![2], vec![], vec![]],
            preds: vec![0, 1, 1, 0],
            weights: vec![5.0, 5.0, 5.0, 1.0],
        };
        run_dag(4, &chain);
        let order = chain.order.into_inner().unwrap();
        assert_eq!(order.len(), 4);
        let pos = |t: usize| order.iter().position(|&x| x == t).unwrap();
        assert!(pos(0) < pos(1));
        assert!(pos(1) < pos(2));
    }
}
