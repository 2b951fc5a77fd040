#include "icarus/render.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "icarus/quantizer.hpp"
#include "icarus/sampling.hpp"

namespace icarus {

const char* to_string(RenderMode m) {
    switch (m) {
        case RenderMode::kExact: return "exact";
        case RenderMode::kApprox: return "approx";
        case RenderMode::kFloat: return "float";
    }
    return "?";
}

RenderMode render_mode_from_string(const std::string& s) {
    if (s == "exact") return RenderMode::kExact;
    if (s == "approx") return RenderMode::kApprox;
    if (s == "float" || s == "float-oracle") return RenderMode::kFloat;
    throw std::invalid_argument("unknown render mode: " + s);
}

void RenderSettings::validate() const {
    if (coarse_samples <= 0) throw std::invalid_argument("render: coarse sample count must be positive");
    if (fine_samples < 0) throw std::invalid_argument("render: fine sample count must be non-negative");
    if (workers <= 0) throw std::invalid_argument("render: worker count must be positive");
    if (batch_size <= 0) throw std::invalid_argument("render: batch size must be positive");
    if (rays_per_unit <= 0) throw std::invalid_argument("render: work unit size must be positive");
    if (delta_frac > 15) throw std::invalid_argument("render: delta frac bits must be at most 15");
}

QFormat delta_format(const Camera& cam, const RenderSettings& s) {
    return QFormat{s.delta_frac >= 0 ? s.delta_frac : activation_frac_for(cam.far - cam.near)};
}

namespace {

// Runs fn(unit_index, first_ray, end_ray) over all work units on s.workers threads.
template <typename Fn>
void for_each_unit(size_t rays, const RenderSettings& s, Fn fn) {
    const size_t per = static_cast<size_t>(s.rays_per_unit);
    const size_t units = (rays + per - 1) / per;
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto work = [&] {
        for (;;) {
            const size_t u = next.fetch_add(1);
            if (u >= units) return;
            try {
                fn(u, u * per, std::min(rays, (u + 1) * per));
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                next.store(units);
            }
        }
    };
    const int n = static_cast<int>(std::min<size_t>(static_cast<size_t>(s.workers), std::max<size_t>(units, 1)));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

size_t unit_count(size_t rays, const RenderSettings& s) {
    const size_t per = static_cast<size_t>(s.rays_per_unit);
    return (rays + per - 1) / per;
}

struct RayPlan {
    Ray ray;
    uint32_t id = 0;
    Rng rng{0};
    std::vector<double> t;
};

std::vector<RayPlan> plan_rays(const std::vector<Ray>& rays, size_t first, size_t end, const Camera& cam,
                               const RenderSettings& s) {
    std::vector<RayPlan> plans;
    plans.reserve(end - first);
    for (size_t i = first; i < end; ++i) {
        RayPlan p;
        p.ray = rays[i];
        p.id = static_cast<uint32_t>(i);
        p.rng = Rng::for_stream(s.seed, i);
        p.t = stratified_samples(cam.near, cam.far, s.coarse_samples, s.jitter ? &p.rng : nullptr);
        plans.push_back(std::move(p));
    }
    return plans;
}

void refine(RayPlan& p, const std::vector<double>& weights, const Camera& cam, const RenderSettings& s) {
    const std::vector<double> edges = stratum_edges(cam.near, cam.far, s.coarse_samples);
    const std::vector<double> fine = importance_samples(edges, weights, s.fine_samples, s.jitter ? &p.rng : nullptr);
    p.t = merge_samples(p.t, fine);
}

// Queues every sample of `plans` on the core for one pass and returns the finished rays by plan index.
std::vector<RayResult> run_pass(PlCore& core, const std::vector<RayPlan>& plans, const Camera& cam, Pass pass) {
    std::vector<TaggedSample> samples;
    for (const RayPlan& p : plans) {
        core.begin_ray(p.id, static_cast<int>(p.t.size()), pass);
        const std::vector<double> deltas = sample_deltas(p.t, cam.far);
        for (size_t k = 0; k < p.t.size(); ++k)
            samples.push_back(core.make_sample(p.ray.origin + p.t[k] * p.ray.direction, p.ray.direction, deltas[k], p.id,
                                               static_cast<uint32_t>(k)));
    }
    core.run(samples, pass);
    std::vector<RayResult> done = core.take_finished();
    if (done.size() != plans.size() || core.open_rays() != 0) throw std::logic_error("render: rays left unfinished");
    const uint32_t base = plans.front().id;
    std::vector<RayResult> by_plan(plans.size());
    for (RayResult& r : done) by_plan[r.ray - base] = std::move(r);
    return by_plan;
}

std::vector<HostShade> shade_float(const FloatModel& model, const RayPlan& p, const Camera& cam, ActivationRanges* ranges) {
    const std::vector<double> deltas = sample_deltas(p.t, cam.far);
    std::vector<HostShade> out(p.t.size());
    for (size_t k = 0; k < p.t.size(); ++k) {
        const OracleShade o = oracle_forward(model, p.ray.origin + p.t[k] * p.ray.direction, p.ray.direction, ranges);
        out[k] = HostShade{o.color, o.sigma, deltas[k]};
    }
    return out;
}

}  // namespace

RenderResult render_fixed(const QuantizedModel& model, const Camera& cam, MultiplierMode mode, const RenderSettings& s,
                          const QuantizedModel* coarse_model) {
    s.validate();
    const std::vector<Ray> rays = generate_rays(cam);
    RenderResult result;
    result.image = Image(cam.width, cam.height);
    std::vector<PerfCounters> unit_counters(unit_count(rays.size(), s));

    PlCoreConfig cfg;
    cfg.mode = mode;
    cfg.batch_size = s.batch_size;
    cfg.delta_fmt = delta_format(cam, s);
    cfg.coarse_model = coarse_model;

    for_each_unit(rays.size(), s, [&](size_t unit, size_t first, size_t end) {
        PlCore core(model, cfg);
        std::vector<RayPlan> plans = plan_rays(rays, first, end, cam, s);
        if (s.fine_samples > 0) {
            const std::vector<RayResult> coarse = run_pass(core, plans, cam, Pass::kCoarse);
            for (size_t i = 0; i < plans.size(); ++i) {
                std::vector<double> w(coarse[i].weights.size());
                for (size_t k = 0; k < w.size(); ++k) w[k] = std::max<int16_t>(coarse[i].weights[k], 0) * kQ1_14.lsb();
                refine(plans[i], w, cam, s);
            }
        }
        const std::vector<RayResult> fine = run_pass(core, plans, cam, Pass::kFine);
        for (size_t i = 0; i < plans.size(); ++i)
            for (int c = 0; c < 3; ++c) result.image.at(plans[i].ray.px, plans[i].ray.py, c) = fine[i].pixel[c].real();
        unit_counters[unit] = core.counters();
    });
    for (const PerfCounters& c : unit_counters) result.counters += c;
    return result;
}

Image render_float(const FloatModel& model, const Camera& cam, const RenderSettings& s, const FloatModel* coarse_model,
                   ActivationRanges* ranges) {
    s.validate();
    model.validate();
    const std::vector<Ray> rays = generate_rays(cam);
    Image img(cam.width, cam.height);
    std::vector<ActivationRanges> unit_ranges(ranges ? unit_count(rays.size(), s) : 0);
    const FloatModel& coarse = coarse_model ? *coarse_model : model;

    for_each_unit(rays.size(), s, [&](size_t unit, size_t first, size_t end) {
        ActivationRanges* r = ranges ? &unit_ranges[unit] : nullptr;
        std::vector<RayPlan> plans = plan_rays(rays, first, end, cam, s);
        for (RayPlan& p : plans) {
            if (s.fine_samples > 0) refine(p, composite_fold(shade_float(coarse, p, cam, r)).weights, cam, s);
            const OracleComposite c = composite_fold(shade_float(model, p, cam, r));
            for (int k = 0; k < 3; ++k) img.at(p.ray.px, p.ray.py, k) = c.pixel[k];
        }
    });
    if (ranges)
        for (const ActivationRanges& r : unit_ranges) ranges->merge(r);
    return img;
}

ActivationRanges calibrate(const FloatModel& model, std::span<const Camera> cams, const RenderSettings& s) {
    ActivationRanges ranges;
    for (const Camera& cam : cams) render_float(model, cam, s, nullptr, &ranges);
    return ranges;
}

}  // namespace icarus
