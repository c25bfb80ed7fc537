#include "relaytrace/reports.hpp"

#include <algorithm>
#include <sstream>

#include "relaytrace/csv.hpp"
#include "relaytrace/errors.hpp"

namespace relaytrace {

namespace {

using csv::escape;
using csv::format_double;

const PeriodStats& stats_for(const ReportInputs& in, const std::string& period) {
  static const PeriodStats kEmpty;
  const auto* s = in.aggregator->period(period);
  return s ? *s : kEmpty;
}

void curve_rows(std::ostringstream& out, const std::string& period, const AggregateMap& map,
                bool with_clean, bool split_campaign) {
  const auto aggs = values(map);
  for (const auto measure : {CurveMeasure::Phishing, CurveMeasure::Clean}) {
    if (measure == CurveMeasure::Clean && !with_clean) continue;
    std::vector<CurvePoint> curve;
    try {
      curve = cumulative_fraction_curve(aggs, measure);
    } catch (const EmptyEntity&) {
      continue;
    }
    const char* m = measure == CurveMeasure::Phishing ? "phishing" : "clean";
    for (const auto& p : curve) {
      out << period << ',' << m << ',' << p.rank << ',';
      if (split_campaign) {
        const auto sep = p.entity.find('\x1f');
        out << escape(p.entity.substr(0, sep)) << ','
            << escape(sep == std::string::npos ? "" : p.entity.substr(sep + 1));
      } else {
        out << escape(p.entity);
      }
      out << ',' << p.count << ',' << format_double(p.cumulative_fraction) << '\n';
    }
  }
}

std::string campaign_curve(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,measure,rank,from_email,normalized_subject,count,cumulative_fraction\n";
  for (const auto& p : in.periods) curve_rows(out, p, stats_for(in, p).by_campaign, false, true);
  return out.str();
}

std::string ip_curve(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,measure,rank,ip,count,cumulative_fraction\n";
  for (const auto& p : in.periods) curve_rows(out, p, stats_for(in, p).by_ip, true, false);
  return out.str();
}

std::string as_curve(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,measure,rank,asn,count,cumulative_fraction\n";
  for (const auto& p : in.periods) curve_rows(out, p, stats_for(in, p).by_asn, true, false);
  return out.str();
}

struct AsRow {
  const EntityAggregate* agg;
  double probability;
  ConcentrationCategory category;
};

std::vector<AsRow> as_rows(const AggregateMap& by_asn, const ConcentrationThresholds& t) {
  std::vector<AsRow> rows;
  for (const auto& [k, agg] : by_asn) {
    if (agg.total() == 0) continue;
    rows.push_back({&agg, probability_of_phishing(agg), classify_concentration(agg, t)});
  }
  return rows;
}

std::string categories_cdf(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,asn,category,probability,phishing,clean,cumulative_phishing_fraction\n";
  for (const auto& p : in.periods) {
    auto rows = as_rows(stats_for(in, p).by_asn, in.settings.concentration);
    std::sort(rows.begin(), rows.end(), [](const AsRow& a, const AsRow& b) {
      if (a.probability != b.probability) return a.probability < b.probability;
      return a.agg->entity < b.agg->entity;
    });
    std::uint64_t total = 0;
    for (const auto& r : rows) total += r.agg->phishing_count;
    if (total == 0) continue;
    std::uint64_t running = 0;
    for (const auto& r : rows) {
      running += r.agg->phishing_count;
      out << p << ',' << r.agg->entity << ',' << to_string(r.category) << ','
          << format_double(r.probability) << ',' << r.agg->phishing_count << ','
          << r.agg->clean_count << ','
          << format_double(static_cast<double>(running) / static_cast<double>(total)) << '\n';
    }
  }
  return out.str();
}

std::string concentration_summary(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,category,as_count,phishing,clean\n";
  for (const auto& p : in.periods) {
    std::map<ConcentrationCategory, LabelCounts> sums;
    std::map<ConcentrationCategory, std::size_t> counts;
    for (const auto& r : as_rows(stats_for(in, p).by_asn, in.settings.concentration)) {
      counts[r.category] += 1;
      sums[r.category].phishing += r.agg->phishing_count;
      sums[r.category].clean += r.agg->clean_count;
    }
    for (const auto c : {ConcentrationCategory::Low, ConcentrationCategory::Medium,
                         ConcentrationCategory::High, ConcentrationCategory::InsufficientVolume}) {
      out << p << ',' << to_string(c) << ',' << counts[c] << ',' << sums[c].phishing << ','
          << sums[c].clean << '\n';
    }
  }
  return out.str();
}

std::string top_as(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,rank,asn,phishing,clean,probability,category\n";
  for (const auto& p : in.periods) {
    const auto top = top_k_by_phishing(values(stats_for(in, p).by_asn), in.settings.top_k);
    std::size_t rank = 0;
    for (const auto& a : top) {
      out << p << ',' << ++rank << ',' << a.entity << ',' << a.phishing_count << ','
          << a.clean_count << ',' << format_double(probability_of_phishing(a)) << ','
          << to_string(classify_concentration(a, in.settings.concentration)) << '\n';
    }
  }
  return out.str();
}

std::string yoy(const ReportInputs& in) {
  std::ostringstream out;
  out << "period_a,period_b,asn,prob_a,prob_b,phishing_a,phishing_b\n";
  for (std::size_t i = 0; i < in.periods.size(); ++i) {
    for (std::size_t j = i + 1; j < in.periods.size(); ++j) {
      const auto& a = in.periods[i];
      const auto& b = in.periods[j];
      for (const auto& pt : yoy_scatter(stats_for(in, a).by_asn, stats_for(in, b).by_asn,
                                        in.settings.yoy_min_phishing)) {
        out << a << ',' << b << ',' << pt.asn << ',' << format_double(pt.prob_a) << ','
            << format_double(pt.prob_b) << ',' << pt.phishing_a << ',' << pt.phishing_b << '\n';
      }
    }
  }
  return out.str();
}

std::string venn(const ReportInputs& in) {
  std::ostringstream out;
  out << "set,periods,count\n";
  if (in.periods.size() < 2 || in.periods.size() > 16) return out.str();
  std::map<std::string, std::set<std::string>> high, top;
  for (const auto& p : in.periods) {
    const auto& by_asn = stats_for(in, p).by_asn;
    for (const auto& r : as_rows(by_asn, in.settings.concentration)) {
      if (r.category == ConcentrationCategory::High) high[p].insert(r.agg->entity);
    }
    for (const auto& a : top_k_by_phishing(values(by_asn), in.settings.top_k)) {
      if (a.phishing_count > 0) top[p].insert(a.entity);
    }
  }
  const auto emit = [&](const char* name, const std::map<std::string, std::set<std::string>>& sets) {
    for (const auto& region : persistence_sets(sets, in.periods)) {
      std::string label;
      for (const auto& p : region.periods) label += (label.empty() ? "" : "+") + p;
      out << name << ',' << label << ',' << region.count << '\n';
    }
  };
  emit("high_concentration", high);
  emit("top_k", top);
  return out.str();
}

std::string country_prob(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,country,phishing,clean,probability\n";
  for (const auto& p : in.periods) {
    for (const auto& c : country_probability_table(stats_for(in, p).by_country,
                                                   in.settings.country_min_total)) {
      out << p << ',' << c.country << ',' << c.phishing << ',' << c.clean << ','
          << format_double(c.probability) << '\n';
    }
  }
  return out.str();
}

std::string route_curve(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,rank,route,phishing,clean,cumulative_fraction\n";
  for (const auto& p : in.periods) {
    const auto& by_route = stats_for(in, p).by_route;
    std::vector<CurvePoint> curve;
    try {
      curve = cumulative_fraction_curve(values(by_route), CurveMeasure::Phishing);
    } catch (const EmptyEntity&) {
      continue;
    }
    for (const auto& pt : curve) {
      const auto& agg = by_route.at(pt.entity);
      out << p << ',' << pt.rank << ',' << escape(pt.entity) << ',' << agg.phishing_count << ','
          << agg.clean_count << ',' << format_double(pt.cumulative_fraction) << '\n';
    }
  }
  return out.str();
}

std::string histogram(const ReportInputs& in, const char* column,
                      std::map<std::size_t, LabelCounts> PeriodStats::*member) {
  std::ostringstream out;
  out << "period," << column << ",phishing,clean\n";
  for (const auto& p : in.periods) {
    for (const auto& [k, c] : stats_for(in, p).*member) {
      out << p << ',' << k << ',' << c.phishing << ',' << c.clean << '\n';
    }
  }
  return out.str();
}

std::string auth_rates(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,label,count,spf_or_dkim,spf_and_dkim,dmarc\n";
  for (const auto& p : in.periods) {
    const auto& s = stats_for(in, p);
    const std::pair<const char*, const AuthCounts*> rows[] = {{"phishing", &s.auth_phishing},
                                                              {"clean", &s.auth_clean}};
    for (const auto& [label, counts] : rows) {
      if (counts->total == 0) continue;
      const auto r = pass_rates(*counts);
      out << p << ',' << label << ',' << r.count << ',' << format_double(r.spf_or_dkim) << ','
          << format_double(r.spf_and_dkim) << ',' << format_double(r.dmarc) << '\n';
    }
  }
  return out.str();
}

std::string lifespans(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,ip,phishing,clean,first_phishing_at,last_phishing_at,lifespan_seconds,lifespan\n";
  for (const auto& p : in.periods) {
    std::vector<const EntityAggregate*> ips;
    for (const auto& [k, agg] : stats_for(in, p).by_ip) {
      if (agg.phishing_count > 0) ips.push_back(&agg);
    }
    std::sort(ips.begin(), ips.end(), [](const EntityAggregate* a, const EntityAggregate* b) {
      if (a->phishing_count != b->phishing_count) return a->phishing_count > b->phishing_count;
      return a->entity < b->entity;
    });
    for (const auto* a : ips) {
      const auto span = phishing_lifespan(*a);
      out << p << ',' << a->entity << ',' << a->phishing_count << ',' << a->clean_count << ','
          << format_iso8601_utc(*a->first_phishing_at) << ','
          << format_iso8601_utc(*a->last_phishing_at) << ',' << span.count() << ','
          << format_lifespan(span) << '\n';
    }
  }
  return out.str();
}

std::string dataset_stats(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,phishing,clean,no_origin_phishing,no_origin_clean,ips,ases,countries,campaigns\n";
  for (const auto& p : in.periods) {
    const auto& s = stats_for(in, p);
    out << p << ',' << s.totals.phishing << ',' << s.totals.clean << ',' << s.no_origin.phishing
        << ',' << s.no_origin.clean << ',' << s.by_ip.size() << ',' << s.by_asn.size() << ','
        << s.by_country.size() << ',' << s.by_campaign.size() << '\n';
  }
  return out.str();
}

std::string cohorts(const ReportInputs& in) {
  std::ostringstream out;
  out << "period,cohort,shared,unique,no_origin\n";
  if (!in.cohorts_available) return out.str();
  for (const auto& [period, c] : in.cohorts) {
    out << period << ",no_prefilter," << c.no_prefilter.shared << ',' << c.no_prefilter.unique
        << ',' << c.no_prefilter.no_origin << '\n';
    out << period << ",with_prefilter," << c.with_prefilter.shared << ','
        << c.with_prefilter.unique << ',' << c.with_prefilter.no_origin << '\n';
  }
  return out.str();
}

}  // namespace

const std::vector<std::string>& report_file_names() {
  static const std::vector<std::string> kNames = {
      "auth_rates.csv",       "categories_cdf.csv",   "cohort_overlap.csv",
      "concentration_summary.csv", "country_prob.csv", "dataset_stats.csv",
      "distinct_country_hist.csv", "fig2_campaign_curve.csv", "fig3_ip_curve.csv",
      "fig4_as_curve.csv",    "lifespans.csv",        "path_length_hist.csv",
      "route_curve.csv",      "top_as.csv",           "venn_regions.csv",
      "yoy_scatter.csv"};
  return kNames;
}

std::map<std::string, std::string> render_reports(const ReportInputs& in) {
  if (!in.aggregator) throw std::invalid_argument("render_reports needs an aggregator");
  std::map<std::string, std::string> out;
  out["fig2_campaign_curve.csv"] = campaign_curve(in);
  out["fig3_ip_curve.csv"] = ip_curve(in);
  out["fig4_as_curve.csv"] = as_curve(in);
  out["categories_cdf.csv"] = categories_cdf(in);
  out["concentration_summary.csv"] = concentration_summary(in);
  out["top_as.csv"] = top_as(in);
  out["yoy_scatter.csv"] = yoy(in);
  out["venn_regions.csv"] = venn(in);
  out["country_prob.csv"] = country_prob(in);
  out["route_curve.csv"] = route_curve(in);
  out["distinct_country_hist.csv"] = histogram(in, "distinct_countries", &PeriodStats::distinct_country_hist);
  out["path_length_hist.csv"] = histogram(in, "path_length", &PeriodStats::path_length_hist);
  out["auth_rates.csv"] = auth_rates(in);
  out["lifespans.csv"] = lifespans(in);
  out["dataset_stats.csv"] = dataset_stats(in);
  out["cohort_overlap.csv"] = cohorts(in);
  return out;
}

}  // namespace relaytrace
