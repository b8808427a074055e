# mpsprep tests
