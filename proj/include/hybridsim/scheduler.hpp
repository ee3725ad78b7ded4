#pragma once

// Discrete-event scheduler for checkpointed rigid batch jobs on a
// time-varying GPU capacity. Queue orderings: FCFS and smallest-work-first
// (SWF), both with a single head reservation and backfilling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

inline constexpr Seconds kNever = std::numeric_limits<Seconds>::max();
inline constexpr Seconds kNoCheckpoint = std::numeric_limits<Seconds>::max();

enum class Policy { FcfsBackfill, Swf };

inline std::string to_string(Policy p) { return p == Policy::FcfsBackfill ? "FCFS_BACKFILL" : "SWF"; }

inline Policy policy_from_string(const std::string& s) {
    if (s == "FCFS_BACKFILL" || s == "fcfs" || s == "FCFS") return Policy::FcfsBackfill;
    if (s == "SWF" || s == "swf") return Policy::Swf;
    throw ConfigError("unknown scheduling policy '" + s + "'");
}

struct BatchJob {
    std::int64_t id = 0;
    Seconds arrival = 0;
    int gpu = 1;
    Seconds runtime = 1;
    Seconds time_limit = 1;
    std::string group;
};

/// [l, ..., l, runtime mod l]; the zero remainder is omitted.
inline std::vector<Seconds> segment_job(Seconds runtime, Seconds ckpt) {
    if (runtime <= 0 || ckpt <= 0) throw DomainError("segment_job: runtime and checkpoint length must be > 0");
    if (ckpt >= runtime) return {runtime};
    std::vector<Seconds> out(static_cast<std::size_t>(runtime / ckpt), ckpt);
    if (runtime % ckpt != 0) out.push_back(runtime % ckpt);
    return out;
}

/// Piecewise-constant GPU availability. The first breakpoint is at t = 0 and
/// the last value holds forever.
class CapacityTimeline {
public:
    CapacityTimeline() : CapacityTimeline(0) {}
    explicit CapacityTimeline(int constant) : times_{0}, values_{constant} {
        if (constant < 0) throw ConfigError("capacity must be >= 0");
    }
    CapacityTimeline(std::vector<Seconds> times, std::vector<int> values)
        : times_(std::move(times)), values_(std::move(values)) {
        if (times_.empty() || times_.size() != values_.size()) {
            throw ConfigError("capacity timeline: need matching, nonempty breakpoints and values");
        }
        if (times_.front() != 0) throw ConfigError("capacity timeline must start at t = 0");
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (values_[i] < 0) throw ConfigError("capacity timeline: negative capacity");
            if (i > 0 && times_[i] <= times_[i - 1]) throw ConfigError("capacity timeline: breakpoints must increase");
        }
    }

    /// Builds a timeline from a per-minute series, keeping only change points.
    static CapacityTimeline from_minutes(const std::vector<int>& per_minute) {
        std::vector<Seconds> t;
        std::vector<int> v;
        for (std::size_t m = 0; m < per_minute.size(); ++m) {
            if (v.empty() || per_minute[m] != v.back()) {
                t.push_back(static_cast<Seconds>(m) * kMinute);
                v.push_back(per_minute[m]);
            }
        }
        if (t.empty()) return CapacityTimeline(0);
        return {std::move(t), std::move(v)};
    }

    int at(Seconds t) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return values_.front();
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    int max_value() const { return *std::max_element(values_.begin(), values_.end()); }
    const std::vector<Seconds>& times() const { return times_; }
    const std::vector<int>& values() const { return values_; }

private:
    std::vector<Seconds> times_;
    std::vector<int> values_;
};

enum class RunStatus { Completed, Preempted, Truncated };

struct SegmentRun {
    std::int64_t segment_id = 0;
    std::int64_t job_id = 0;
    int seg_index = 0;
    Seconds start = 0;
    Seconds end = 0;
    int gpu = 0;
    RunStatus status = RunStatus::Completed;
    Seconds job_offset = 0;  // job progress at the segment's start
};

/// The first reservation computed for a segment when it was the blocked head.
struct HeadReservation {
    std::int64_t job_id = 0;
    int seg_index = 0;
    Seconds decided_at = 0;
    Seconds reserved_start = 0;
};

struct BackfillStart {
    std::int64_t job_id = 0;
    int seg_index = 0;
    Seconds start = 0;
    Seconds planned_end = 0;
    Seconds head_reservation = 0;
};

struct Rejection {
    std::int64_t job_id = 0;
    std::string reason;
};

struct JobOutcome {
    std::int64_t job_id = 0;
    std::optional<Seconds> first_start;
    std::optional<Seconds> completion;
    int preemptions = 0;
};

struct ScheduleTrace {
    std::vector<SegmentRun> runs;
    std::vector<HeadReservation> reservations;
    std::vector<BackfillStart> backfills;
    std::vector<Rejection> rejected;
    std::vector<JobOutcome> jobs;  // same order as the input job list

    /// Queueing delay of the first segment, if it ever started.
    std::optional<Seconds> queue_delay(std::size_t job_index, Seconds arrival) const {
        const auto& s = jobs[job_index].first_start;
        if (!s) return std::nullopt;
        return *s - arrival;
    }
};

struct SchedulerOptions {
    Policy policy = Policy::FcfsBackfill;
    Seconds ckpt = kNoCheckpoint;
    bool preempt_on_drop = true;
    Seconds horizon = kNever;
};

namespace detail {

class EventScheduler {
public:
    EventScheduler(const std::vector<BatchJob>& jobs, const CapacityTimeline& capacity, const SchedulerOptions& opt)
        : jobs_(jobs), capacity_(capacity), opt_(opt) {}

    ScheduleTrace run() {
        trace_.jobs.resize(jobs_.size());
        segments_.resize(jobs_.size());
        const int max_cap = capacity_.max_value();
        std::vector<std::size_t> arrivals;
        for (std::size_t i = 0; i < jobs_.size(); ++i) {
            const auto& j = jobs_[i];
            trace_.jobs[i].job_id = j.id;
            if (j.gpu < 1 || j.runtime <= 0) {
                trace_.rejected.push_back({j.id, "job needs gpu >= 1 and runtime > 0"});
            } else if (j.gpu > max_cap) {
                trace_.rejected.push_back({j.id, "gpu request " + std::to_string(j.gpu) +
                                                     " exceeds maximum capacity " + std::to_string(max_cap)});
            } else {
                segments_[i] = segment_job(j.runtime, opt_.ckpt);
                arrivals.push_back(i);
            }
        }
        std::stable_sort(arrivals.begin(), arrivals.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(jobs_[a].arrival, jobs_[a].id) < std::tie(jobs_[b].arrival, jobs_[b].id);
        });

        const auto& cap_times = capacity_.times();
        cap_ = capacity_.values().front();
        std::size_t ci = 1;
        std::size_t ai = 0;
        Seconds now = 0;
        for (;;) {
            const Seconds t_arr = ai < arrivals.size() ? jobs_[arrivals[ai]].arrival : kNever;
            Seconds t_done = kNever;
            for (const auto& r : running_) t_done = std::min(t_done, r.end);
            const Seconds t_cap = ci < cap_times.size() ? cap_times[ci] : kNever;
            const Seconds t = std::min({t_arr, t_done, t_cap});
            if (t == kNever || t >= opt_.horizon) break;
            now = t;

            complete_at(now);
            while (ci < cap_times.size() && cap_times[ci] <= now) cap_ = capacity_.values()[ci++];
            if (opt_.preempt_on_drop) preempt_to_fit(now);
            while (ai < arrivals.size() && jobs_[arrivals[ai]].arrival <= now) {
                enqueue(arrivals[ai], 0);
                ++ai;
            }
            schedule_pass(now);
        }
        // Only reachable with a finite horizon: whatever still runs is cut there.
        for (const auto& r : running_) {
            if (r.end <= opt_.horizon) {
                record(r, r.end, RunStatus::Completed);
                if (static_cast<std::size_t>(r.seg + 1) == segments_[r.job].size()) trace_.jobs[r.job].completion = r.end;
            } else {
                record(r, opt_.horizon, RunStatus::Truncated);
            }
        }
        return std::move(trace_);
    }

private:
    using Key = std::tuple<Seconds, Seconds, Seconds, std::int64_t>;

    struct Pending {
        Key key;
        std::size_t job;
        int seg;
        bool operator<(const Pending& o) const { return std::tie(key, seg) < std::tie(o.key, o.seg); }
    };

    struct Running {
        std::size_t job;
        int seg;
        Seconds start;
        Seconds end;
        int gpu;
        std::uint64_t seq;
    };

    Key key_for(std::size_t j) const {
        const auto& job = jobs_[j];
        if (opt_.policy == Policy::Swf) return {job.gpu, job.runtime, job.arrival, job.id};
        return {job.arrival, job.id, 0, 0};
    }

    Seconds duration(std::size_t j, int seg) const { return segments_[j][static_cast<std::size_t>(seg)]; }

    Seconds offset(std::size_t j, int seg) const {
        Seconds off = 0;
        for (int k = 0; k < seg; ++k) off += segments_[j][static_cast<std::size_t>(k)];
        return off;
    }

    void enqueue(std::size_t j, int seg) { queue_.insert({key_for(j), j, seg}); }

    void record(const Running& r, Seconds end, RunStatus status) {
        if (end <= r.start) return;
        SegmentRun run;
        run.segment_id = static_cast<std::int64_t>(trace_.runs.size());
        run.job_id = jobs_[r.job].id;
        run.seg_index = r.seg;
        run.start = r.start;
        run.end = end;
        run.gpu = r.gpu;
        run.status = status;
        run.job_offset = offset(r.job, r.seg);
        trace_.runs.push_back(run);
    }

    int usage() const {
        int u = 0;
        for (const auto& r : running_) u += r.gpu;
        return u;
    }

    void complete_at(Seconds now) {
        std::vector<Running> done;
        auto it = std::stable_partition(running_.begin(), running_.end(), [&](const Running& r) { return r.end != now; });
        done.assign(it, running_.end());
        running_.erase(it, running_.end());
        std::sort(done.begin(), done.end(), [](const Running& a, const Running& b) { return a.seq < b.seq; });
        for (const auto& r : done) {
            record(r, r.end, RunStatus::Completed);
            if (static_cast<std::size_t>(r.seg + 1) < segments_[r.job].size()) {
                enqueue(r.job, r.seg + 1);
            } else {
                trace_.jobs[r.job].completion = r.end;
            }
        }
    }

    void preempt_to_fit(Seconds now) {
        int u = usage();
        if (u <= cap_) return;
        std::sort(running_.begin(), running_.end(), [](const Running& a, const Running& b) {
            return std::tie(a.start, a.seq) > std::tie(b.start, b.seq);
        });
        std::size_t k = 0;
        while (u > cap_ && k < running_.size()) {
            const auto& r = running_[k++];
            record(r, now, RunStatus::Preempted);
            ++trace_.jobs[r.job].preemptions;
            enqueue(r.job, r.seg);
            u -= r.gpu;
        }
        running_.erase(running_.begin(), running_.begin() + static_cast<std::ptrdiff_t>(k));
    }

    void start(const Pending& p, Seconds now) {
        const Running r{p.job, p.seg, now, now + duration(p.job, p.seg), jobs_[p.job].gpu, next_seq_++};
        running_.push_back(r);
        auto& outcome = trace_.jobs[p.job];
        if (!outcome.first_start) outcome.first_start = now;
    }

    /// Earliest time the running set frees `need` GPUs, assuming the current
    /// capacity persists. kNever if `need` exceeds the current capacity.
    Seconds reservation(int need, int used, Seconds now) const {
        if (need > cap_) return kNever;
        int free = cap_ - used;
        if (free >= need) return now;
        std::vector<std::pair<Seconds, int>> ends;
        for (const auto& r : running_) ends.emplace_back(r.end, r.gpu);
        std::sort(ends.begin(), ends.end());
        for (std::size_t i = 0; i < ends.size();) {
            const Seconds t = ends[i].first;
            for (; i < ends.size() && ends[i].first == t; ++i) free += ends[i].second;
            if (free >= need) return t;
        }
        return kNever;
    }

    void schedule_pass(Seconds now) {
        int used = usage();
        auto it = queue_.begin();
        while (it != queue_.end()) {
            const int gpu = jobs_[it->job].gpu;
            if (used + gpu <= cap_) {
                start(*it, now);
                used += gpu;
                it = queue_.erase(it);
                continue;
            }
            const Seconds reserved = reservation(gpu, used, now);
            const std::pair<std::size_t, int> head{it->job, it->seg};
            if (last_blocked_head_ != head) {
                trace_.reservations.push_back({jobs_[it->job].id, it->seg, now, reserved});
                last_blocked_head_ = head;
            }
            for (++it; it != queue_.end();) {
                const int g = jobs_[it->job].gpu;
                const Seconds d = duration(it->job, it->seg);
                if (used + g <= cap_ && (reserved == kNever || now + d <= reserved)) {
                    trace_.backfills.push_back({jobs_[it->job].id, it->seg, now, now + d, reserved});
                    start(*it, now);
                    used += g;
                    it = queue_.erase(it);
                } else {
                    ++it;
                }
            }
            break;
        }
    }

    const std::vector<BatchJob>& jobs_;
    const CapacityTimeline& capacity_;
    SchedulerOptions opt_;
    ScheduleTrace trace_;
    std::vector<std::vector<Seconds>> segments_;
    std::set<Pending> queue_;
    std::vector<Running> running_;
    std::optional<std::pair<std::size_t, int>> last_blocked_head_;
    std::uint64_t next_seq_ = 0;
    int cap_ = 0;
};

}  // namespace detail

/// Runs the event loop. Events are processed per timestamp in the order
/// completions, capacity change (with preemption), arrivals, then one
/// scheduling pass. A blocked head gets one reservation; later queue
/// entries may start only if they fit now and finish by that reservation.
inline ScheduleTrace schedule(const std::vector<BatchJob>& jobs, const CapacityTimeline& capacity,
                              const SchedulerOptions& options) {
    return detail::EventScheduler(jobs, capacity, options).run();
}

/// Time-weighted GPU occupancy per minute over [0, minutes).
inline std::vector<double> busy_gpu_minutes(const std::vector<SegmentRun>& runs, std::size_t minutes) {
    std::vector<double> busy(minutes, 0.0);
    const Seconds horizon = static_cast<Seconds>(minutes) * kMinute;
    for (const auto& r : runs) {
        Seconds t = std::max<Seconds>(0, r.start);
        const Seconds end = std::min(r.end, horizon);
        while (t < end) {
            const Seconds m = t / kMinute;
            const Seconds next = std::min(end, (m + 1) * kMinute);
            busy[static_cast<std::size_t>(m)] += r.gpu * static_cast<double>(next - t) / kMinute;
            t = next;
        }
    }
    return busy;
}

struct RevealedCapacity {
    CapacityTimeline timeline;
    std::vector<int> daily_p99;
    bool dropped_partial_day = false;
};

/// Nearest-rank percentile: the ceil(q * n)-th smallest value.
inline int nearest_rank(std::vector<int> values, double q) {
    if (values.empty()) throw DomainError("nearest_rank: empty sample");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

/// Running maximum of daily nearest-rank p99 busy-GPU counts, as a daily
/// step function. A partial trailing day is dropped and flagged.
inline RevealedCapacity revealed_capacity(const std::vector<int>& busy_per_minute) {
    RevealedCapacity out;
    const std::size_t days = busy_per_minute.size() / kMinutesPerDay;
    out.dropped_partial_day = busy_per_minute.size() % kMinutesPerDay != 0;
    if (days == 0) throw DomainError("revealed_capacity: series shorter than one day");
    std::vector<Seconds> times;
    std::vector<int> values;
    int running = 0;
    for (std::size_t d = 0; d < days; ++d) {
        const auto first = busy_per_minute.begin() + static_cast<std::ptrdiff_t>(d * kMinutesPerDay);
        const int p99 = nearest_rank(std::vector<int>(first, first + kMinutesPerDay), 0.99);
        out.daily_p99.push_back(p99);
        running = d == 0 ? p99 : std::max(running, p99);
        times.push_back(static_cast<Seconds>(d) * kDay);
        values.push_back(running);
    }
    out.timeline = CapacityTimeline(std::move(times), std::move(values));
    return out;
}

}  // namespace hybridsim
