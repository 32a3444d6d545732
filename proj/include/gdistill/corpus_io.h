// include/gdistill/corpus_io.h

// Copyright 2026  gdistill authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef GDISTILL_CORPUS_IO_H_
#define GDISTILL_CORPUS_IO_H_

// Corpus persistence. A corpus directory holds:
//   manifest.txt   one line per pair: id, utterance file, image file,
//                  speaker id, condition tag, caption words
//   corpus.cfg     the generating configuration, [corpus] section
//   utt/<id>.gdfa  features + frame labels, one archive per utterance
//   img/<id>.gdfa  pixels + object ids, one archive per image
//
// The phone inventory is not stored: it is a pure function of the config,
// so ReadCorpus rebuilds it and the caller gets a corpus indistinguishable
// from the generated one.

#include <string>

#include "gdistill/config_file.h"
#include "gdistill/corpus.h"

namespace gdistill {

void WriteCorpus(const Corpus &corpus, const std::string &dir);

Corpus ReadCorpus(const std::string &dir);

// The [corpus] section mapping used by corpus.cfg and by gen-data configs.
// FromFile applies defaults for missing keys and rejects unknown ones.
ConfigFile CorpusConfigToFile(const CorpusConfig &config);
CorpusConfig CorpusConfigFromFile(const ConfigFile &file);

}  // namespace gdistill

#endif  // GDISTILL_CORPUS_IO_H_
