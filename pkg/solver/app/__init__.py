# 무한 지평 Dec-POMDP 솔버 - Backend
