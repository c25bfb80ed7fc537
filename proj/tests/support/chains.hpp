#pragma once

// Hand-built trace-field chains with their expected origin and path length.
// Headers are listed newest first, as they appear in a message.

#include <string>
#include <vector>

#include "relaytrace/ingest.hpp"

namespace rt_test {

struct Chain {
  const char* name;
  std::vector<relaytrace::Header> headers;
  const char* origin;  // nullptr: no public origin
  std::size_t length;
};

inline std::vector<Chain> origin_chains() {
  using H = relaytrace::Header;
  return {
      {"three public hops",
       {H{"Received", "from 3.3.3.3 by 4.4.4.4"}, H{"Received", "from 2.2.2.2 by 3.3.3.3"},
        H{"Received", "from 1.1.1.1 by 2.2.2.2"}},
       "1.1.1.1", 3},
      {"private submission hop first",
       {H{"Received", "from relay.sender.example (relay.sender.example [5.5.5.5]) by mx.corp.example (6.6.6.6)"},
        H{"Received", "from desk (desk [192.168.1.10]) by relay.sender.example (5.5.5.5)"}},
       "5.5.5.5", 2},
      {"bracketed v6 with tag",
       {H{"Received", "from mail.example.org (mail.example.org [IPv6:2606:4700::1111]) by mx.corp.example ([2001:4860::1]); Tue, 5 Jan 2021 10:00:00 +0000"}},
       "2606:4700::1111", 1},
      {"hostname-only earliest hop",
       {H{"Received", "from mail.sender.example (mail.sender.example [8.8.4.4]) by mx.corp.example"},
        H{"Received", "from localhost by mail.sender.example"}},
       "8.8.4.4", 2},
      {"no trace fields", {H{"Subject", "hi"}, H{"From", "a@b.example"}}, nullptr, 0},
      {"all private", {H{"Received", "from a (a [10.0.0.1]) by b (10.0.0.2)"}}, nullptr, 1},
      {"cgnat and private before public",
       {H{"Received", "from gw (gw [81.2.69.142]) by mx (93.184.216.34)"},
        H{"Received", "from cpe (cpe [100.64.1.1]) by gw (81.2.69.142)"},
        H{"Received", "from pc (pc [172.20.0.5]) by cpe (100.64.1.1)"}},
       "81.2.69.142", 3},
      {"postfix style",
       {H{"Received", "from mail-ot1-f44.google.example (mail-ot1-f44.google.example [209.85.210.44]) by mx.corp.example (Postfix) with ESMTPS id 4D9A2; Tue, 5 Jan 2021 10:00:00 +0000 (UTC)"}},
       "209.85.210.44", 1},
      {"exchange online style",
       {H{"Received", "from AM6PR05MB1234.eurprd05.prod.outlook.example (2603:10a6:20b:1::12) by AM6PR05MB5678.eurprd05.prod.outlook.example with HTTPS; Tue, 5 Jan 2021 10:00:01 +0000"},
        H{"Received", "from EUR05-AM6-obe.outbound.example (mail-am6eur05on2100.outbound.example [40.107.22.100]) by AM6PR05MB1234.eurprd05.prod.outlook.example (10.1.2.3) with Microsoft SMTP Server; Tue, 5 Jan 2021 10:00:00 +0000"}},
       "40.107.22.100", 2},
      {"helo comment",
       {H{"Received", "from unknown (HELO relay.example) ([77.88.21.5]) by mx.corp.example with SMTP"}},
       "77.88.21.5", 1},
      {"uppercase keywords", {H{"Received", "FROM a.example ([52.1.2.3]) BY b.example ([52.1.2.4])"}}, "52.1.2.3", 1},
      {"lowercase header name",
       {H{"received", "from x (x [23.5.6.7]) by y (23.5.6.8)"}, H{"RECEIVED", "from w (w [10.9.9.9]) by x (23.5.6.7)"}},
       "23.5.6.7", 2},
      {"x-received is not a trace hop",
       {H{"X-Received", "from z (z [44.1.1.1]) by q"}, H{"Received", "from y (y [45.1.1.1]) by mx (46.1.1.1)"}},
       "45.1.1.1", 1},
      {"documentation and loopback skipped",
       {H{"Received", "from out (out [81.2.69.160]) by mx (93.184.216.34)"},
        H{"Received", "from lab (lab [203.0.113.5]) by out (81.2.69.160)"},
        H{"Received", "from localhost (localhost [127.0.0.1]) by lab (203.0.113.5)"}},
       "81.2.69.160", 3},
      {"unparseable hop still counted",
       {H{"Received", "from mx-in (mx-in [93.184.216.34]) by store (10.0.0.3)"},
        H{"Received", "garbage without keywords"},
        H{"Received", "from client (client [198.199.1.2]) by mx-in (93.184.216.34)"}},
       "198.199.1.2", 3},
      {"by-only local delivery",
       {H{"Received", "by mx.corp.example with LMTP id abc; Tue, 5 Jan 2021 10:00:02 +0000"},
        H{"Received", "from web (web [93.184.216.34]) by mx.corp.example (20.1.1.1)"}},
       "93.184.216.34", 2},
      {"v4-mapped v6 addresses",
       {H{"Received", "from r (r [IPv6:::ffff:8.8.8.8]) by mx (20.2.2.2)"},
        H{"Received", "from h (h [IPv6:::ffff:10.1.1.1]) by r ([IPv6:::ffff:8.8.8.8])"}},
       "::ffff:8.8.8.8", 2},
      {"bare address with trailing punctuation",
       {H{"Received", "from 185.60.216.35: by mx.corp.example (20.3.3.3)"}}, "185.60.216.35", 1},
      {"via keyword between from and by",
       {H{"Received", "from x (x [31.13.64.1]) via relay by z (20.4.4.4) with ESMTP"}}, "31.13.64.1", 1},
      {"numeric-looking hostname",
       {H{"Received", "from 1234.example.com (unknown [45.33.32.156]) by mx (20.5.5.5)"}}, "45.33.32.156", 1},
      {"ip only in by clause",
       {H{"Received", "from sender.example by mx (20.6.6.6)"}}, nullptr, 1},
      {"public v6 behind private v6",
       {H{"Received", "from edge (edge [2a00:1450:4864::1]) by mx ([2001:4860::2])"},
        H{"Received", "from host (host [fd00::5]) by edge ([2a00:1450:4864::1])"}},
       "2a00:1450:4864::1", 2},
      {"semicolon inside comment",
       {H{"Received", "from a (a [62.1.1.1]; helo=a) by b (62.1.1.2); Tue, 5 Jan 2021 10:00:00 +0000"}},
       "62.1.1.1", 1},
      {"equals-delimited addresses",
       {H{"Received", "from [195.22.1.9] (port=51234 helo=mail.example) by mx (195.22.1.10)"}}, "195.22.1.9", 1},
  };
}

}  // namespace rt_test
